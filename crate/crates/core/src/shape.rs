//! Melodic shape of a multi-note group, found by fitting a parabola to
//! its pitches and reading the fitted curve's axis of symmetry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::melody::{NoteGroup, Pitch};
use crate::tone::Tone;

pub const FIT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ShapeCategory {
    Level,
    Rising,
    Falling,
    RisingFalling,
    FallingRising,
}

impl ShapeCategory {
    /// The shape of the same group played backwards. A peak stays a peak
    /// and a valley stays a valley.
    pub fn reversed(self) -> Self {
        match self {
            Self::Rising => Self::Falling,
            Self::Falling => Self::Rising,
            other => other,
        }
    }

    /// The shape of the group turned upside down in pitch.
    pub fn inverted(self) -> Self {
        match self {
            Self::Level => Self::Level,
            Self::Rising => Self::Falling,
            Self::Falling => Self::Rising,
            Self::RisingFalling => Self::FallingRising,
            Self::FallingRising => Self::RisingFalling,
        }
    }
}

/// Where the notes sit on the x axis of the fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum XMode {
    /// Note indices 0..n-1.
    #[default]
    Index,
    /// Note onset times in quarter notes.
    Duration,
}

/// Least-squares `a x^2 + b x + c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParabolaFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl ParabolaFit {
    /// Axis of symmetry `-b / 2a`, absent for a straight line.
    pub fn axis(&self) -> Option<f64> {
        (self.a != 0.0).then(|| -self.b / (2.0 * self.a))
    }
}

/// Fits `pitches` at `positions`. Two points give the line through them;
/// |a| below [`FIT_TOLERANCE`] is reported as exactly zero.
pub fn fit_parabola(pitches: &[Pitch], positions: &[f64]) -> Result<ParabolaFit> {
    let n = pitches.len();
    if n < 2 {
        return Err(Error::Domain(format!("need at least 2 points to fit, got {n}")));
    }
    if positions.len() != n {
        return Err(Error::Domain(format!("{n} pitches vs {} positions", positions.len())));
    }
    if positions.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) || positions.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("positions must be finite and strictly increasing".into()));
    }

    // Work relative to the mean position and the lowest pitch so the
    // normal equations stay well conditioned and shifts are exact.
    let base = *pitches.iter().min().unwrap();
    let nf = n as f64;
    let mean_x = positions.iter().sum::<f64>() / nf;
    let us: Vec<f64> = positions.iter().map(|x| x - mean_x).collect();
    let ys: Vec<f64> = pitches.iter().map(|p| f64::from(p - base)).collect();

    let (mut s2, mut s3, mut s4, mut t0, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for (u, y) in us.iter().zip(&ys) {
        let u2 = u * u;
        s2 += u2;
        s3 += u2 * u;
        s4 += u2 * u2;
        t0 += y;
        t1 += u * y;
        t2 += u2 * y;
    }
    // Sum of u is zero by construction.
    let line = (t1 / s2, t0 / nf);
    let a = if n == 2 {
        0.0
    } else {
        // Cramer's rule on
        // | s4 s3 s2 | |a|   |t2|
        // | s3 s2 0  | |b| = |t1|
        // | s2 0  n  | |c|   |t0|
        let det = s4 * s2 * nf - s3 * s3 * nf - s2 * s2 * s2;
        let det_a = t2 * s2 * nf - s3 * t1 * nf - s2 * s2 * t0;
        det_a / det
    };
    let (a, qb, qc) = if a.abs() <= FIT_TOLERANCE {
        (0.0, line.0, line.1)
    } else {
        let det = s4 * s2 * nf - s3 * s3 * nf - s2 * s2 * s2;
        let det_b = s4 * t1 * nf - t2 * s3 * nf + s2 * (s3 * t0 - s2 * t1);
        (a, det_b / det, (t0 - a * s2) / nf)
    };

    // Back to the caller's coordinates: x = u + mean_x, y = y' + base.
    let b = qb - 2.0 * a * mean_x;
    let c = qc - qb * mean_x + a * mean_x * mean_x + f64::from(base);
    let b = if b.abs() <= FIT_TOLERANCE { 0.0 } else { b };
    Ok(ParabolaFit { a, b, c })
}

fn positions(group: &NoteGroup, mode: XMode) -> Vec<f64> {
    match mode {
        XMode::Index => (0..group.len()).map(|i| i as f64).collect(),
        XMode::Duration => {
            let mut t = 0.0;
            group
                .durations()
                .iter()
                .map(|d| {
                    let onset = t;
                    t += *d.numer() as f64 / *d.denom() as f64;
                    onset
                })
                .collect()
        }
    }
}

pub fn classify_shape(group: &NoteGroup) -> Result<ShapeCategory> {
    classify_shape_with(group, XMode::Index)
}

pub fn classify_shape_with(group: &NoteGroup, mode: XMode) -> Result<ShapeCategory> {
    if group.len() < 2 {
        return Err(Error::Domain("single-note groups have no shape".into()));
    }
    let p = group.pitches();
    let range = p.iter().max().unwrap() - p.iter().min().unwrap();
    if range <= 1 {
        return Ok(ShapeCategory::Level);
    }
    let xs = positions(group, mode);
    let fit = fit_parabola(p, &xs)?;
    let (first, last) = (xs[0], xs[xs.len() - 1]);

    let Some(axis) = fit.axis() else {
        return Ok(if fit.b > 0.0 {
            ShapeCategory::Rising
        } else if fit.b < 0.0 {
            ShapeCategory::Falling
        } else {
            ShapeCategory::Level
        });
    };
    let a = fit.a;
    let shape = if axis <= first + FIT_TOLERANCE {
        if a > 0.0 {
            ShapeCategory::Rising
        } else {
            ShapeCategory::Falling
        }
    } else if axis >= last - FIT_TOLERANCE {
        if a < 0.0 {
            ShapeCategory::Rising
        } else {
            ShapeCategory::Falling
        }
    } else if a < 0.0 {
        ShapeCategory::RisingFalling
    } else {
        ShapeCategory::FallingRising
    };
    Ok(shape)
}

/// Whether a group's shape can carry a syllable of the given tone.
/// Level fits everything; the neutral tone fits everything.
pub fn shape_matches_tone(shape: ShapeCategory, tone: Tone) -> bool {
    if tone.is_neutral() {
        return true;
    }
    match shape {
        ShapeCategory::Level => true,
        ShapeCategory::Rising => tone == Tone::RISING,
        ShapeCategory::Falling => tone == Tone::FALLING,
        ShapeCategory::FallingRising => tone == Tone::DIPPING,
        ShapeCategory::RisingFalling => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::melody::Beats;
    use approx::assert_abs_diff_eq;

    fn idx(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    fn shape(p: &[Pitch]) -> ShapeCategory {
        classify_shape(&NoteGroup::quarters(p).unwrap()).unwrap()
    }

    #[test]
    fn exact_line() {
        let f = fit_parabola(&[60, 61, 62], &idx(3)).unwrap();
        assert_eq!(f.a, 0.0);
        assert_abs_diff_eq!(f.b, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(f.c, 60.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_pair() {
        let f = fit_parabola(&[60, 60], &idx(2)).unwrap();
        assert_eq!((f.a, f.b), (0.0, 0.0));
        assert_abs_diff_eq!(f.c, 60.0, epsilon = 1e-12);
    }

    #[test]
    fn love_group_fit() {
        // Frozen from an independent polynomial least-squares solve:
        // a = -0.5, b = 1.3, c = 65.3, axis = 1.3.
        let f = fit_parabola(&[65, 67, 65, 65], &idx(4)).unwrap();
        assert_abs_diff_eq!(f.a, -0.5, epsilon = 1e-9);
        assert_abs_diff_eq!(f.b, 1.3, epsilon = 1e-9);
        assert_abs_diff_eq!(f.c, 65.3, epsilon = 1e-9);
        assert_abs_diff_eq!(f.axis().unwrap(), 1.3, epsilon = 1e-9);
        assert_eq!(shape(&[65, 67, 65, 65]), ShapeCategory::RisingFalling);
    }

    #[test]
    fn fit_errors() {
        assert!(fit_parabola(&[60], &[0.0]).is_err());
        assert!(fit_parabola(&[60, 62], &[1.0, 1.0]).is_err());
        assert!(classify_shape(&NoteGroup::quarters(&[60]).unwrap()).is_err());
    }

    #[test]
    fn named_shapes() {
        assert_eq!(shape(&[64, 65]), ShapeCategory::Level);
        assert_eq!(shape(&[69, 64]), ShapeCategory::Falling);
        assert_eq!(shape(&[60, 62, 64]), ShapeCategory::Rising);
        assert_eq!(shape(&[60, 64, 60]), ShapeCategory::RisingFalling);
        assert_eq!(shape(&[64, 60, 64]), ShapeCategory::FallingRising);
        // Convex but with the axis left of the first note: rising.
        assert_eq!(shape(&[60, 61, 64]), ShapeCategory::Rising);
    }

    #[test]
    fn duration_mode_uses_onsets() {
        let g = NoteGroup::new(
            vec![60, 64, 66],
            vec![Beats::from_integer(3), Beats::new(1, 2), Beats::from_integer(1)],
        )
        .unwrap();
        // Onsets 0, 3, 3.5: the climb steepens, so the fit is convex with
        // its axis inside the group.
        assert_eq!(classify_shape_with(&g, XMode::Index).unwrap(), ShapeCategory::Rising);
        assert_eq!(classify_shape_with(&g, XMode::Duration).unwrap(), ShapeCategory::FallingRising);
    }

    #[test]
    fn matching_table() {
        for t in Tone::all() {
            assert!(shape_matches_tone(ShapeCategory::Level, t));
            assert!(shape_matches_tone(ShapeCategory::RisingFalling, t) == t.is_neutral());
        }
        assert!(shape_matches_tone(ShapeCategory::Rising, Tone::RISING));
        assert!(!shape_matches_tone(ShapeCategory::Rising, Tone::FALLING));
        assert!(shape_matches_tone(ShapeCategory::Falling, Tone::FALLING));
        assert!(shape_matches_tone(ShapeCategory::FallingRising, Tone::DIPPING));
        assert!(!shape_matches_tone(ShapeCategory::FallingRising, Tone::HIGH));
    }
}
