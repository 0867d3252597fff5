//! Semantic-reduction baselines and the preprocessing recipe fed to the
//! detector.

use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use crate::image::{Image8, ImageF};
use crate::mapping::{self, MappingMode, MappingTable};
use crate::rng;
use crate::spectral::{dft2, idft2};
use crate::{Error, Result};

pub const DEFAULT_HIGHPASS_CUTOFF: f64 = 0.25;
pub const DEFAULT_NPR_BLOCK: usize = 2;

/// Zero every DC-centered frequency with radius below
/// `cutoff_fraction * min(H, W) / 2`, per channel, and keep the real part of
/// the inverse transform. Output is in the input's units (0..255 scale).
pub fn highpass(img: &Image8, cutoff_fraction: f64) -> Result<ImageF> {
    if !(cutoff_fraction > 0.0 && cutoff_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "highpass cutoff must lie in (0, 1), got {cutoff_fraction}"
        )));
    }
    let (h, w) = (img.height(), img.width());
    let radius = cutoff_fraction * h.min(w) as f64 / 2.0;
    let (cy, cx) = (h / 2, w / 2);
    let keep: Vec<bool> = (0..h * w)
        .map(|i| {
            let dy = ((i / w + cy) % h) as f64 - cy as f64;
            let dx = ((i % w + cx) % w) as f64 - cx as f64;
            (dy * dy + dx * dx).sqrt() >= radius
        })
        .collect();

    let mut out = ImageF::zeros(h, w, 3);
    for c in 0..3 {
        let plane: Vec<f64> = img.data().iter().skip(c).step_by(3).map(|&v| f64::from(v)).collect();
        let mut spec = dft2(&plane, h, w)?;
        for (bin, &k) in spec.iter_mut().zip(&keep) {
            if !k {
                *bin = Complex64::default();
            }
        }
        let back = idft2(&spec, h, w)?;
        for (i, v) in back.iter().enumerate() {
            out.set(i / w, i % w, c, v.re);
        }
    }
    Ok(out)
}

/// Permute non-overlapping `patch`×`patch` tiles with one seeded
/// Fisher-Yates shuffle. Output tile `i` (row-major) is source tile
/// `perm[i]`; channels move together.
pub fn patch_shuffle(img: &Image8, patch: usize, seed: u64) -> Result<Image8> {
    check_divides("patch", patch, img.height(), img.width())?;
    let (tiles_y, tiles_x) = (img.height() / patch, img.width() / patch);
    let mut perm: Vec<usize> = (0..tiles_y * tiles_x).collect();
    rng::fisher_yates(&mut rng::seeded(seed), &mut perm);

    let w = img.width();
    let src = img.data();
    let mut data = vec![0u8; src.len()];
    for (dst_tile, &src_tile) in perm.iter().enumerate() {
        let (dy, dx) = ((dst_tile / tiles_x) * patch, (dst_tile % tiles_x) * patch);
        let (sy, sx) = ((src_tile / tiles_x) * patch, (src_tile % tiles_x) * patch);
        for row in 0..patch {
            let d = ((dy + row) * w + dx) * 3;
            let s = ((sy + row) * w + sx) * 3;
            data[d..d + patch * 3].copy_from_slice(&src[s..s + patch * 3]);
        }
    }
    Image8::new(img.height(), img.width(), data)
}

/// Block-anchor residual: inside each `block`×`block` cell every sample has
/// the cell's top-left sample of the same channel subtracted.
///
/// This is a simple proxy for neighbouring-pixel-relationship residuals,
/// not a reproduction of any published NPR network input.
pub fn npr_residual(img: &Image8, block: usize) -> Result<ImageF> {
    check_divides("block", block, img.height(), img.width())?;
    Ok(ImageF::from_fn(img.height(), img.width(), 3, |y, x, c| {
        let anchor = img.get(y - y % block, x - x % block, c);
        f64::from(img.get(y, x, c)) - f64::from(anchor)
    }))
}

fn check_divides(what: &str, n: usize, height: usize, width: usize) -> Result<()> {
    if n == 0 || height % n != 0 || width % n != 0 {
        return Err(Error::InvalidArgument(format!(
            "{what} size {n} must divide {height}x{width}"
        )));
    }
    Ok(())
}

/// Preprocessing applied to each crop before it reaches the detector.
///
/// Seeds are supplied per image at [`Reducer::prepare`] time, so one recipe
/// covers a whole dataset while every image still gets its own shuffle
/// permutation or random tables.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Reducer {
    /// Plain `v / 127.5 - 1` normalization.
    None,
    Fixed,
    Random,
    Highpass { cutoff: f64 },
    Shuffle { patch: usize },
    Npr { block: usize },
}

impl Reducer {
    /// The comparison set, in reporting order.
    pub const COMPARISON: [Reducer; 7] = [
        Reducer::None,
        Reducer::Highpass {
            cutoff: DEFAULT_HIGHPASS_CUTOFF,
        },
        Reducer::Shuffle { patch: 8 },
        Reducer::Shuffle { patch: 2 },
        Reducer::Npr {
            block: DEFAULT_NPR_BLOCK,
        },
        Reducer::Fixed,
        Reducer::Random,
    ];

    pub fn validate(&self) -> Result<()> {
        match *self {
            Reducer::Highpass { cutoff } if !(cutoff > 0.0 && cutoff < 1.0) => Err(
                Error::InvalidArgument(format!("highpass cutoff must lie in (0, 1), got {cutoff}")),
            ),
            Reducer::Shuffle { patch: 0 } => Err(Error::InvalidArgument("shuffle patch must be ≥ 1".into())),
            Reducer::Npr { block: 0 } => Err(Error::InvalidArgument("npr block must be ≥ 1".into())),
            _ => Ok(()),
        }
    }

    /// Check that the recipe can run on `size`×`size` crops.
    pub fn check_crop(&self, size: usize) -> Result<()> {
        self.validate()?;
        match *self {
            Reducer::Shuffle { patch } if size % patch != 0 => Err(Error::InvalidArgument(format!(
                "shuffle patch {patch} must divide crop size {size}"
            ))),
            Reducer::Npr { block } if size % block != 0 => Err(Error::InvalidArgument(format!(
                "npr block {block} must divide crop size {size}"
            ))),
            _ => Ok(()),
        }
    }

    /// Detector-ready input. Mapping outputs are used as-is (already near
    /// unit scale); pixel-domain outputs are divided by 127.5, and
    /// shuffle/none additionally shifted to `[-1, 1]`.
    pub fn prepare(&self, img: &Image8, seed: u64) -> Result<ImageF> {
        let normalized = || mapping::apply_mapping(img, &[MappingTable::standard_normalization()]);
        match *self {
            Reducer::None => normalized(),
            Reducer::Fixed => mapping::apply_mapping(img, &MappingMode::Fixed.tables()),
            Reducer::Random => mapping::apply_mapping(img, &MappingMode::Random { seed }.tables()),
            Reducer::Highpass { cutoff } => Ok(highpass(img, cutoff)?.map(|v| v / 127.5)),
            Reducer::Shuffle { patch } => {
                let shuffled = patch_shuffle(img, patch, seed)?;
                mapping::apply_mapping(&shuffled, &[MappingTable::standard_normalization()])
            }
            Reducer::Npr { block } => Ok(npr_residual(img, block)?.map(|v| v / 127.5)),
        }
    }

    /// Whether [`Reducer::prepare`] depends on its seed.
    pub fn is_stochastic(&self) -> bool {
        matches!(self, Reducer::Random | Reducer::Shuffle { .. })
    }
}

impl fmt::Display for Reducer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Reducer::None => f.write_str("none"),
            Reducer::Fixed => f.write_str("fixed"),
            Reducer::Random => f.write_str("random"),
            Reducer::Highpass { cutoff } if cutoff == DEFAULT_HIGHPASS_CUTOFF => f.write_str("highpass"),
            Reducer::Highpass { cutoff } => write!(f, "highpass:{cutoff}"),
            Reducer::Shuffle { patch } => write!(f, "shuffle:{patch}"),
            Reducer::Npr { block } if block == DEFAULT_NPR_BLOCK => f.write_str("npr"),
            Reducer::Npr { block } => write!(f, "npr:{block}"),
        }
    }
}

impl FromStr for Reducer {
    type Err = Error;

    /// Accepts `none`, `fixed`, `random`, `highpass[:cutoff]`,
    /// `shuffle:patch` and `npr[:block]`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let bad = |msg: &str| Error::InvalidArgument(format!("reducer {s:?}: {msg}"));
        let reducer = match (name, arg) {
            ("none", None) => Reducer::None,
            ("fixed", None) => Reducer::Fixed,
            ("random", None) => Reducer::Random,
            ("highpass", None) => Reducer::Highpass {
                cutoff: DEFAULT_HIGHPASS_CUTOFF,
            },
            ("highpass", Some(a)) => Reducer::Highpass {
                cutoff: a.parse().map_err(|_| bad("cutoff is not a number"))?,
            },
            ("shuffle", Some(a)) => Reducer::Shuffle {
                patch: a.parse().map_err(|_| bad("patch is not an integer"))?,
            },
            ("shuffle", None) => return Err(bad("shuffle needs a patch size, e.g. shuffle:8")),
            ("npr", None) => Reducer::Npr {
                block: DEFAULT_NPR_BLOCK,
            },
            ("npr", Some(a)) => Reducer::Npr {
                block: a.parse().map_err(|_| bad("block is not an integer"))?,
            },
            _ => return Err(bad("unknown reducer")),
        };
        reducer.validate()?;
        Ok(reducer)
    }
}
