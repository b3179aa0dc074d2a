use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::Array2;

use super::{BinaryBlock, BlockError};

/// Where the profiled stretch of one retained row starts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProfileRow {
    /// Row index inside the block.
    pub row: usize,
    /// Column of the first interior run.
    pub start: usize,
}

/// Aligned ridge and valley widths: row `i` of `rw` holds the widths of the
/// ridges of retained row `i`, left to right.
#[derive(Clone, Debug, PartialEq)]
pub struct RidgeValleyProfile {
    pub rw: Array2<f64>,
    pub vw: Array2<f64>,
    pub rows: Vec<ProfileRow>,
    /// Whether each retained row's interior starts with a ridge run.
    pub first_is_ridge: bool,
}

impl RidgeValleyProfile {
    /// Profile from raw width matrices (rows start at column 0 with a ridge).
    pub fn from_widths(rw: Array2<f64>, vw: Array2<f64>) -> Self {
        assert_eq!(rw.nrows(), vw.nrows(), "rw and vw need the same row count");
        let rows = (0..rw.nrows()).map(|row| ProfileRow { row, start: 0 }).collect();
        Self {
            rw,
            vw,
            rows,
            first_is_ridge: true,
        }
    }

    pub fn valid_rows(&self) -> usize {
        self.rw.nrows()
    }

    pub fn ridge_count(&self) -> usize {
        self.rw.ncols()
    }

    pub fn valley_count(&self) -> usize {
        self.vw.ncols()
    }

    /// Debug dump: block row index, then the run widths left to right.
    pub fn to_debug_text(&self) -> String {
        let mut out = String::new();
        for (i, pr) in self.rows.iter().enumerate() {
            let _ = write!(out, "{}", pr.row);
            let (nr, nv) = (self.ridge_count(), self.valley_count());
            let (mut ri, mut vi, mut ridge) = (0, 0, self.first_is_ridge);
            while ri < nr || vi < nv {
                let w = if ridge && ri < nr {
                    ri += 1;
                    self.rw[[i, ri - 1]]
                } else if !ridge && vi < nv {
                    vi += 1;
                    self.vw[[i, vi - 1]]
                } else {
                    break;
                };
                let _ = write!(out, "\t{w}");
                ridge = !ridge;
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Run {
    ridge: bool,
    start: usize,
    len: usize,
}

fn runs(row: impl Iterator<Item = bool>) -> Vec<Run> {
    let mut out: Vec<Run> = Vec::new();
    for (i, v) in row.enumerate() {
        match out.last_mut() {
            Some(run) if run.ridge == v => run.len += 1,
            _ => out.push(Run {
                ridge: v,
                start: i,
                len: 1,
            }),
        }
    }
    out
}

/// Run-length profile of a binary block.
///
/// Runs touching the left or right border are dropped (their true width is
/// unobservable). Only rows whose interior run pattern (first phase, ridge
/// count, valley count) equals the block's most common pattern are kept, so
/// column `j` of `rw` follows the same physical ridge down the block.
pub fn run_length_profile(bin: &BinaryBlock) -> Result<RidgeValleyProfile, BlockError> {
    let (h, _) = bin.mask.dim();
    if bin.mask.is_empty() {
        return Err(BlockError::Unprofilable("empty mask".into()));
    }
    let interiors: Vec<Vec<Run>> = (0..h)
        .map(|r| {
            let rs = runs(bin.mask.row(r).iter().copied());
            if rs.len() >= 3 {
                rs[1..rs.len() - 1].to_vec()
            } else {
                Vec::new()
            }
        })
        .collect();

    type Key = (bool, usize, usize);
    let key_of = |rs: &[Run]| -> Option<Key> {
        let first = rs.first()?;
        let nr = rs.iter().filter(|r| r.ridge).count();
        Some((first.ridge, nr, rs.len() - nr))
    };

    // Most frequent pattern, earliest row wins ties.
    let mut tally: HashMap<Key, (usize, usize)> = HashMap::new();
    for (r, rs) in interiors.iter().enumerate() {
        if let Some(k) = key_of(rs) {
            tally.entry(k).or_insert((0, r)).0 += 1;
        }
    }
    let Some((&modal, _)) = tally
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
    else {
        return Err(BlockError::Unprofilable("no interior runs".into()));
    };
    let (first_is_ridge, nr, nv) = modal;
    if nr == 0 {
        return Err(BlockError::Unprofilable("no complete ridge".into()));
    }

    let kept: Vec<usize> = (0..h).filter(|&r| key_of(&interiors[r]) == Some(modal)).collect();
    if kept.len() < 2 {
        return Err(BlockError::Unprofilable(format!("{} aligned row(s)", kept.len())));
    }

    let mut rw = Array2::zeros((kept.len(), nr));
    let mut vw = Array2::zeros((kept.len(), nv));
    let mut rows = Vec::with_capacity(kept.len());
    for (i, &r) in kept.iter().enumerate() {
        let (mut ri, mut vi) = (0, 0);
        for run in &interiors[r] {
            if run.ridge {
                rw[[i, ri]] = run.len as f64;
                ri += 1;
            } else {
                vw[[i, vi]] = run.len as f64;
                vi += 1;
            }
        }
        rows.push(ProfileRow {
            row: r,
            start: interiors[r][0].start,
        });
    }
    Ok(RidgeValleyProfile {
        rw,
        vw,
        rows,
        first_is_ridge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hand_run_length() {
        let bin = BinaryBlock::from_rows(&["VVRRRVV"; 4]);
        let p = run_length_profile(&bin).unwrap();
        assert_eq!(p.rw, Array2::from_elem((4, 1), 3.0));
        assert_eq!(p.vw.dim(), (4, 0));
        assert_eq!(p.rows[0], ProfileRow { row: 0, start: 2 });
    }

    #[test]
    fn perfect_stripes_have_constant_widths() {
        let row: String = (0..32).map(|c| if (c / 5) % 2 == 0 { 'R' } else { 'V' }).collect();
        let rows = vec![row.as_str(); 32];
        let p = run_length_profile(&BinaryBlock::from_rows(&rows)).unwrap();
        assert_eq!(p.valid_rows(), 32);
        assert!(p.rw.iter().chain(p.vw.iter()).all(|&w| w == 5.0));
        assert!(!p.first_is_ridge);
    }

    #[test]
    fn spurious_blob_row_is_excluded() {
        let mut rows = vec!["VVRRRVVVRRRVV"; 6];
        rows[3] = "VVRRRVRVRRRVV";
        let p = run_length_profile(&BinaryBlock::from_rows(&rows)).unwrap();
        assert_eq!(p.valid_rows(), 5);
        assert!(p.rows.iter().all(|r| r.row != 3));
        assert_eq!(p.rw.dim(), (5, 2));
        assert_eq!(p.vw, Array2::from_elem((5, 1), 3.0));
    }

    #[test]
    fn unprofilable_blocks() {
        assert!(matches!(
            run_length_profile(&BinaryBlock::from_rows(&["VVVV"; 5])),
            Err(BlockError::Unprofilable(_))
        ));
        // one aligned row only
        assert!(run_length_profile(&BinaryBlock::from_rows(&["VRRV", "VVVV", "RRRR"])).is_err());
        // interior valley only
        assert!(run_length_profile(&BinaryBlock::from_rows(&["RVVR"; 3])).is_err());
    }

    #[test]
    fn debug_dump() {
        let p = run_length_profile(&BinaryBlock::from_rows(&["VRRVVVRV"; 2])).unwrap();
        assert_eq!(p.to_debug_text(), "0\t2\t3\t1\n1\t2\t3\t1\n");
    }

    proptest! {
        #[test]
        fn retained_rows_share_counts(bits in proptest::collection::vec(any::<bool>(), 12 * 20)) {
            let mask = Array2::from_shape_fn((12, 20), |(r, c)| bits[r * 20 + c]);
            let bin = BinaryBlock { mask: mask.clone(), threshold: crate::blocks::ThresholdPlane::fit(&mask.mapv(|b| b as u8 as f64)) };
            if let Ok(p) = run_length_profile(&bin) {
                prop_assert!(p.valid_rows() >= 2);
                prop_assert!(p.ridge_count() >= 1);
                prop_assert!(p.rw.iter().chain(p.vw.iter()).all(|&w| w >= 1.0));
                for (i, pr) in p.rows.iter().enumerate() {
                    let rs = runs(mask.row(pr.row).iter().copied());
                    let interior = &rs[1..rs.len() - 1];
                    prop_assert_eq!(interior.iter().filter(|r| r.ridge).count(), p.ridge_count());
                    prop_assert_eq!(interior.len() - p.ridge_count(), p.valley_count());
                    let total: f64 = p.rw.row(i).sum() + p.vw.row(i).sum();
                    prop_assert_eq!(total as usize, interior.iter().map(|r| r.len).sum::<usize>());
                }
            }
        }
    }
}
