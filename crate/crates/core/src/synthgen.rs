//! Synthetic covariate signals: step or bell-shaped events on top of a
//! piecewise-linear trend with random changepoints.
//!
//! Generation is split into [`SyntheticCovariate::sample`], which draws every
//! structural parameter, and [`SyntheticCovariate::render`], which evaluates
//! the signal on the integer grid `0..len`. Tests and experiments build specs
//! by hand and render them.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::config::SynthGenConfig;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// One Gaussian bump `amplitude * exp(-(t - position)^2 / (2 width^2))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Bell {
    pub position: f64,
    pub amplitude: f64,
    pub width: f64,
}

impl Bell {
    pub fn eval(&self, t: f64) -> f64 {
        let z = (t - self.position) / self.width;
        self.amplitude * (-0.5 * z * z).exp()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Events {
    /// The signal toggles between `0` and `amplitude` at each sorted position,
    /// starting at 0.
    Step { positions: Vec<f64>, amplitude: f64 },
    /// Bells are summed.
    Gauss(Vec<Bell>),
}

impl Events {
    pub fn count(&self) -> usize {
        match self {
            Events::Step { positions, .. } => positions.len(),
            Events::Gauss(bells) => bells.len(),
        }
    }

    pub fn render(&self, len: usize) -> Vec<f64> {
        match self {
            Events::Step {
                positions,
                amplitude,
            } => {
                let mut sorted = positions.clone();
                sorted.sort_by(f64::total_cmp);
                (0..len)
                    .map(|t| {
                        let passed = sorted.iter().take_while(|&&p| p <= t as f64).count();
                        if passed % 2 == 1 {
                            *amplitude
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            Events::Gauss(bells) => (0..len)
                .map(|t| bells.iter().map(|b| b.eval(t as f64)).sum())
                .collect(),
        }
    }
}

/// Piecewise-linear trend through `(0, a_0), (pi_1, a_1), .., (len, a_last)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trend {
    /// Interior changepoint positions in `[0, len)`, any order.
    pub changepoints: Vec<f64>,
    /// `changepoints.len() + 2` knot values; first and last are the endpoints.
    pub amplitudes: Vec<f64>,
}

impl Trend {
    pub fn flat() -> Self {
        Self {
            changepoints: Vec::new(),
            amplitudes: vec![0.0, 0.0],
        }
    }

    pub fn render(&self, len: usize) -> Vec<f64> {
        debug_assert_eq!(self.amplitudes.len(), self.changepoints.len() + 2);
        let mut inner = self.changepoints.clone();
        inner.sort_by(f64::total_cmp);
        let mut knots = Vec::with_capacity(inner.len() + 2);
        knots.push((0.0, self.amplitudes[0]));
        for (i, &p) in inner.iter().enumerate() {
            knots.push((p, self.amplitudes[i + 1]));
        }
        knots.push((len as f64, *self.amplitudes.last().unwrap()));
        (0..len).map(|t| interpolate(&knots, t as f64)).collect()
    }
}

fn interpolate(knots: &[(f64, f64)], t: f64) -> f64 {
    // Last knot with x <= t; knots are sorted and the first is at 0.
    let i = knots.partition_point(|&(x, _)| x <= t).max(1) - 1;
    if i + 1 >= knots.len() {
        return knots[knots.len() - 1].1;
    }
    let (x0, y0) = knots[i];
    let (x1, y1) = knots[i + 1];
    if x1 - x0 <= f64::EPSILON {
        return y1;
    }
    y0 + (y1 - y0) * (t - x0) / (x1 - x0)
}

/// Fully specified synthetic covariate.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCovariate {
    pub events: Events,
    pub trend: Trend,
}

impl SyntheticCovariate {
    /// Draws events and trend for a series of length `len`.
    pub fn sample(len: usize, cfg: &SynthGenConfig, rng: &mut Rng) -> Result<Self> {
        if len < 2 {
            return Err(Error::Domain(format!(
                "synthetic covariate length {len} < 2"
            )));
        }
        cfg.validate()?;
        let n = len as f64;
        let amp = Normal::new(0.0, cfg.amplitude_std).expect("validated std");

        let c_e = rng.random_range(1..=cfg.c_e_max);
        let positions: Vec<f64> = (0..c_e).map(|_| rng.random_range(0.0..n)).collect();
        let events = if rng.random_bool(0.5) {
            Events::Step {
                positions,
                amplitude: amp.sample(rng),
            }
        } else {
            let (lo, hi) = cfg.bell_width_range;
            let bells = positions
                .into_iter()
                .map(|position| Bell {
                    position,
                    amplitude: amp.sample(rng),
                    width: if hi > lo {
                        rng.random_range(lo * n..hi * n)
                    } else {
                        lo * n
                    },
                })
                .collect();
            Events::Gauss(bells)
        };

        let c_cp = rng.random_range(0..=cfg.c_cp_max);
        let changepoints: Vec<f64> = (0..c_cp).map(|_| rng.random_range(0.0..n)).collect();
        let cp_amp = Normal::new(0.0, cfg.sigma_cp).expect("validated sigma");
        let amplitudes = (0..c_cp + 2).map(|_| cp_amp.sample(rng)).collect();

        Ok(Self {
            events,
            trend: Trend {
                changepoints,
                amplitudes,
            },
        })
    }

    pub fn render(&self, len: usize) -> Vec<f64> {
        self.events
            .render(len)
            .into_iter()
            .zip(self.trend.render(len))
            .map(|(e, t)| e + t)
            .collect()
    }
}

/// Draws and renders one synthetic covariate of length `len`.
pub fn generate_synthetic_covariate(
    len: usize,
    cfg: &SynthGenConfig,
    rng: &mut Rng,
) -> Result<Vec<f64>> {
    Ok(SyntheticCovariate::sample(len, cfg, rng)?.render(len))
}
