//! Image loading and dataset manifests.

mod manifest;

pub use manifest::{
    build_manifest, summarize, DatasetManifest, LayoutDescriptor, LayoutRule, SampleRecord,
    SplitSummary,
};

use std::fmt;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use image::{DynamicImage, ImageReader};
use thiserror::Error;

/// Resolution assumed when the file carries no density metadata.
pub const DEFAULT_DPI: u32 = 500;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: cannot decode image: {msg}")]
    Decode { path: PathBuf, msg: String },
    #[error("{path}: unsupported bit depth ({bits} bits per sample, expected 8)")]
    UnsupportedBitDepth { path: PathBuf, bits: u16 },
    #[error("{path}: not a grayscale image ({color}); color input is rejected")]
    NotGrayscale { path: PathBuf, color: String },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("no image files found under {0}")]
    EmptyTree(PathBuf),
    #[error("ambiguous label folder for {} file(s): {}", .0.len(), list_paths(.0))]
    AmbiguousLabel(Vec<PathBuf>),
    #[error("{} file(s) match no layout rule: {}", .0.len(), list_paths(.0))]
    Unmatched(Vec<PathBuf>),
    #[error("duplicate sample: {first} and {second} have identical content but sit in different splits")]
    DuplicateSample { first: PathBuf, second: PathBuf },
    #[error("layout line {line}: {msg}")]
    Layout { line: usize, msg: String },
    #[error("manifest line {line}: {msg}")]
    Manifest { line: usize, msg: String },
    #[error("manifest is empty")]
    EmptyManifest,
}

fn list_paths(paths: &[PathBuf]) -> String {
    paths
        .iter()
        .map(|p| p.display().to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// 8-bit grayscale raster, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntensityGrid {
    width: usize,
    height: usize,
    dpi: u32,
    pixels: Vec<u8>,
}

impl IntensityGrid {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, IngestError> {
        if width == 0 || height == 0 {
            return Err(IngestError::InvalidGrid(format!("zero dimension {width}x{height}")));
        }
        if pixels.len() != width * height {
            return Err(IngestError::InvalidGrid(format!(
                "{} pixels for a {width}x{height} grid",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            dpi: DEFAULT_DPI,
            pixels,
        })
    }

    /// Builds a grid by evaluating `f(x, y)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        assert!(width > 0 && height > 0, "grid dimensions must be positive");
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            dpi: DEFAULT_DPI,
            pixels,
        }
    }

    pub fn with_dpi(mut self, dpi: u32) -> Self {
        self.dpi = dpi;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dpi(&self) -> u32 {
        self.dpi
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    /// Bilinear sample at real coordinates, pixel centers at integers.
    /// `None` when the 2x2 support leaves the grid.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f64> {
        if !(x >= 0.0 && y >= 0.0) {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        if x0 >= self.width || y0 >= self.height {
            return None;
        }
        // Exactly on the last row/column needs no right/bottom neighbour.
        let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
        let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
        if x1 >= self.width || y1 >= self.height {
            return None;
        }
        let p = |xx: usize, yy: usize| f64::from(self.get(xx, yy));
        let top = p(x0, y0) * (1.0 - fx) + p(x1, y0) * fx;
        let bottom = p(x0, y1) * (1.0 - fx) + p(x1, y1) * fx;
        Some(top * (1.0 - fy) + bottom * fy)
    }

    /// Binary portable graymap (P5) encoding.
    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
        use image::{ExtendedColorType, ImageEncoder};
        let mut out = Vec::with_capacity(self.pixels.len() + 32);
        PnmEncoder::new(&mut out)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(
                &self.pixels,
                self.width as u32,
                self.height as u32,
                ExtendedColorType::L8,
            )
            .expect("in-memory graymap encoding cannot fail for a valid grid");
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), IngestError> {
        let path = path.as_ref();
        std::fs::write(path, self.to_pgm_bytes()).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Loads an 8-bit grayscale PGM or PNG without any rescaling.
pub fn load_image(path: impl AsRef<Path>) -> Result<IntensityGrid, IngestError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_image(&bytes, path)
}

/// Decodes in-memory image bytes; `origin` is used in diagnostics only.
pub fn decode_image(bytes: &[u8], origin: &Path) -> Result<IntensityGrid, IngestError> {
    let decode_err = |msg: String| IngestError::Decode {
        path: origin.to_path_buf(),
        msg,
    };
    let reader = ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| decode_err(e.to_string()))?;
    let img = reader.decode().map_err(|e| decode_err(e.to_string()))?;
    match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            IntensityGrid::new(w as usize, h as usize, buf.into_raw())
        }
        DynamicImage::ImageLuma16(_) => Err(IngestError::UnsupportedBitDepth {
            path: origin.to_path_buf(),
            bits: 16,
        }),
        other => Err(IngestError::NotGrayscale {
            path: origin.to_path_buf(),
            color: format!("{:?}", other.color()),
        }),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Live,
    Fake,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Live => "Live",
            Label::Fake => "Fake",
        })
    }
}

impl FromStr for Label {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" | "real" | "alive" => Ok(Label::Live),
            "fake" | "spoof" => Ok(Label::Fake),
            _ => Err(format!("unknown label {s:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "Train",
            Split::Test => "Test",
        })
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "train" | "training" => Ok(Split::Train),
            "test" | "testing" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

/// Spoof fabrication material.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Material {
    Gelatin,
    PlayDoh,
    Silicone,
    Ecoflex,
    Latex,
    WoodGlue,
    BodyDouble,
    LiquidEcoflex,
    Rtv,
    Oomoo,
    /// Folder name not in the known list, kept verbatim.
    Other(String),
    /// Fake sample whose material was not recorded.
    Unknown,
}

impl Material {
    pub fn parse(s: &str) -> Material {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match key.as_str() {
            "gelatin" | "gelatine" => Material::Gelatin,
            "playdoh" => Material::PlayDoh,
            "silicone" | "silicon" => Material::Silicone,
            "ecoflex" => Material::Ecoflex,
            "latex" => Material::Latex,
            "woodglue" => Material::WoodGlue,
            "bodydouble" => Material::BodyDouble,
            "liquidecoflex" => Material::LiquidEcoflex,
            "rtv" => Material::Rtv,
            "oomoo" => Material::Oomoo,
            "" | "unknown" => Material::Unknown,
            _ => Material::Other(s.trim().replace(['\t', '\n'], " ")),
        }
    }
}

impl fmt::Display for Material {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Material::Gelatin => "Gelatin",
            Material::PlayDoh => "PlayDoh",
            Material::Silicone => "Silicone",
            Material::Ecoflex => "Ecoflex",
            Material::Latex => "Latex",
            Material::WoodGlue => "WoodGlue",
            Material::BodyDouble => "BodyDouble",
            Material::LiquidEcoflex => "LiquidEcoflex",
            Material::Rtv => "RTV",
            Material::Oomoo => "OOMOO",
            Material::Other(s) => s,
            Material::Unknown => "unknown",
        };
        f.write_str(s)
    }
}

/// `-` for live samples, the material name otherwise.
pub fn material_field(material: Option<&Material>) -> String {
    material.map_or_else(|| "-".to_string(), |m| m.to_string())
}

/// Inverse of [`material_field`], enforcing "material iff fake".
pub fn parse_material_field(label: Label, field: &str) -> Result<Option<Material>, String> {
    match (label, field) {
        (Label::Live, "-") => Ok(None),
        (Label::Live, other) => Err(format!("live sample carries material {other:?}")),
        (Label::Fake, "-") => Ok(Some(Material::Unknown)),
        (Label::Fake, m) => Ok(Some(Material::parse(m))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, ImageBuffer, Luma, Rgb};

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn loads_3x2_graymap_exactly() {
        let dir = tmp();
        let path = dir.path().join("a.pgm");
        std::fs::write(&path, b"P5\n3 2\n255\n\x00\x80\xff\x0a\x14\x1e").unwrap();
        let g = load_image(&path).unwrap();
        assert_eq!((g.width(), g.height()), (3, 2));
        assert_eq!(g.pixels(), &[0, 128, 255, 10, 20, 30]);
        assert_eq!(g.dpi(), DEFAULT_DPI);
    }

    #[test]
    fn loads_ascii_graymap_and_single_pixel() {
        let dir = tmp();
        let path = dir.path().join("b.pgm");
        std::fs::write(&path, b"P2\n1 1\n255\n255\n").unwrap();
        assert_eq!(load_image(&path).unwrap().pixels(), &[255]);
    }

    #[test]
    fn loads_png_grayscale() {
        let dir = tmp();
        let path = dir.path().join("c.png");
        let img: GrayImage = ImageBuffer::from_raw(2, 2, vec![1, 2, 3, 250]).unwrap();
        img.save(&path).unwrap();
        assert_eq!(load_image(&path).unwrap().pixels(), &[1, 2, 3, 250]);
    }

    #[test]
    fn rejects_16_bit() {
        let dir = tmp();
        let path = dir.path().join("d.pgm");
        std::fs::write(&path, b"P5\n1 1\n65535\n\x12\x34").unwrap();
        let err = load_image(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported bit depth"), "{err}");
    }

    #[test]
    fn rejects_color() {
        let dir = tmp();
        let path = dir.path().join("e.png");
        let img: ImageBuffer<Rgb<u8>, _> = ImageBuffer::from_pixel(2, 2, Rgb([1, 2, 3]));
        img.save(&path).unwrap();
        assert!(matches!(load_image(&path), Err(IngestError::NotGrayscale { .. })));
    }

    #[test]
    fn rejects_missing_and_garbage() {
        let dir = tmp();
        assert!(matches!(load_image(dir.path().join("nope.pgm")), Err(IngestError::Io { .. })));
        let path = dir.path().join("junk.png");
        std::fs::write(&path, b"not an image").unwrap();
        assert!(matches!(load_image(&path), Err(IngestError::Decode { .. })));
    }

    #[test]
    fn grid_invariants() {
        assert!(IntensityGrid::new(0, 1, vec![]).is_err());
        assert!(IntensityGrid::new(2, 2, vec![0; 3]).is_err());
        let g = IntensityGrid::new(2, 1, vec![5, 6]).unwrap();
        assert_eq!(g.get(1, 0), 6);
    }

    #[test]
    fn bilinear_sampling() {
        let g = IntensityGrid::new(2, 2, vec![0, 100, 100, 200]).unwrap();
        assert_eq!(g.sample_bilinear(0.5, 0.5), Some(100.0));
        assert_eq!(g.sample_bilinear(1.0, 1.0), Some(200.0));
        assert_eq!(g.sample_bilinear(0.0, 0.0), Some(0.0));
        assert_eq!(g.sample_bilinear(1.5, 0.0), None);
        assert_eq!(g.sample_bilinear(-0.1, 0.0), None);
    }

    #[test]
    fn pgm_writer_is_byte_stable() {
        let g = IntensityGrid::from_fn(7, 3, |x, y| (x * 31 + y * 17) as u8);
        let bytes = g.to_pgm_bytes();
        let back = decode_image(&bytes, Path::new("mem")).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_pgm_bytes(), bytes);
        let _ = Luma([0u8]);
    }

    #[test]
    fn material_parsing() {
        assert_eq!(Material::parse("Play-Doh"), Material::PlayDoh);
        assert_eq!(Material::parse("Liquid Ecoflex"), Material::LiquidEcoflex);
        assert_eq!(Material::parse("RTV"), Material::Rtv);
        assert_eq!(Material::parse("Wax"), Material::Other("Wax".into()));
        assert_eq!(parse_material_field(Label::Live, "-"), Ok(None));
        assert!(parse_material_field(Label::Live, "Silicone").is_err());
        assert_eq!(parse_material_field(Label::Fake, "-"), Ok(Some(Material::Unknown)));
    }

    proptest::proptest! {
        #[test]
        fn pgm_round_trip(w in 1usize..20, h in 1usize..20, seed in proptest::prelude::any::<u64>()) {
            let g = IntensityGrid::from_fn(w, h, |x, y| (crate::rng::mix(seed, (y * w + x) as u64) & 0xff) as u8);
            let bytes = g.to_pgm_bytes();
            let back = decode_image(&bytes, Path::new("mem")).unwrap();
            proptest::prop_assert_eq!(&back, &g);
            proptest::prop_assert_eq!(back.to_pgm_bytes(), bytes);
        }
    }
}
