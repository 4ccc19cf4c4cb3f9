//! Path-loss propagation and the per-link SINR.
//!
//! Powers are linear throughout. Received power is `p * d^-eta`, with `d`
//! clamped from below by [`ChannelParams::min_distance`] so coincident nodes
//! stay finite.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{distance, Position};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelParams {
    /// Path-loss exponent.
    pub eta: f64,
    /// Transmit power of flow transmitters.
    pub p_t: f64,
    /// Transmit power of robots.
    pub p_m: f64,
    /// Noise power, identical on every link.
    pub p_n: f64,
    /// Log-normal fading standard deviation in dB. Zero disables fading.
    pub fading_sigma: f64,
    /// Distances below this are clamped before path loss is applied.
    pub min_distance: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        ChannelParams {
            eta: 2.0,
            p_t: 1.0,
            p_m: 1.0,
            p_n: 1.0,
            fading_sigma: 0.0,
            min_distance: 0.1,
        }
    }
}

impl ChannelParams {
    pub fn with_noise(p_n: f64) -> Self {
        ChannelParams {
            p_n,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    format!("channel.{name}"),
                    format!("must be finite and > 0, got {v}"),
                ))
            }
        };
        let non_negative = |name: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::validation(
                    format!("channel.{name}"),
                    format!("must be finite and >= 0, got {v}"),
                ))
            }
        };
        positive("eta", self.eta)?;
        positive("p_t", self.p_t)?;
        positive("p_m", self.p_m)?;
        non_negative("p_n", self.p_n)?;
        non_negative("fading_sigma", self.fading_sigma)?;
        positive("min_distance", self.min_distance)
    }
}

/// A transmitting node as seen from a receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter {
    pub position: Position,
    pub power: f64,
}

impl Emitter {
    pub fn new(position: Position, power: f64) -> Self {
        Emitter { position, power }
    }
}

/// `p_tx * max(d, min_distance)^-eta`.
pub fn received_power(p_tx: f64, d: f64, params: &ChannelParams) -> f64 {
    p_tx * d.max(params.min_distance).powf(-params.eta)
}

/// SINR at `rx_pos` of a signal sent from `tx_pos`, ignoring fading.
///
/// Fails with [`Error::UndefinedDenominator`] when there is neither noise nor
/// any interferer.
pub fn link_sinr(
    tx_pos: &Position,
    rx_pos: &Position,
    tx_power: f64,
    interferers: &[Emitter],
    params: &ChannelParams,
) -> Result<f64> {
    let signal = received_power(tx_power, distance(tx_pos, rx_pos), params);
    let interference: f64 = interferers
        .iter()
        .map(|e| received_power(e.power, distance(&e.position, rx_pos), params))
        .sum();
    sinr_ratio(signal, interference, params.p_n, interferers.is_empty())
}

fn sinr_ratio(signal: f64, interference: f64, noise: f64, no_interferers: bool) -> Result<f64> {
    if noise == 0.0 && no_interferers {
        return Err(Error::UndefinedDenominator);
    }
    Ok(signal / (interference + noise))
}

/// Seeded source of log-normal fading gains.
///
/// Each call to [`FadingSampler::gain`] draws `psi ~ N(0, sigma^2)` in dB and
/// returns the linear factor `10^(psi / 10)`.
#[derive(Debug, Clone)]
pub struct FadingSampler {
    rng: ChaCha8Rng,
    normal: Option<Normal<f64>>,
}

impl FadingSampler {
    pub fn new(sigma_db: f64, seed: u64) -> Result<Self> {
        if !(sigma_db.is_finite() && sigma_db >= 0.0) {
            return Err(Error::validation(
                "channel.fading_sigma",
                format!("must be finite and >= 0, got {sigma_db}"),
            ));
        }
        let normal = if sigma_db > 0.0 {
            Some(Normal::new(0.0, sigma_db).map_err(|e| Error::validation("channel.fading_sigma", e.to_string()))?)
        } else {
            None
        };
        Ok(FadingSampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            normal,
        })
    }

    pub fn gain(&mut self) -> f64 {
        match &self.normal {
            Some(n) => 10f64.powf(n.sample(&mut self.rng) / 10.0),
            None => 1.0,
        }
    }
}

/// [`link_sinr`] with an independent fading draw on the signal and on every
/// interference term.
pub fn link_sinr_faded(
    tx_pos: &Position,
    rx_pos: &Position,
    tx_power: f64,
    interferers: &[Emitter],
    params: &ChannelParams,
    fading: &mut FadingSampler,
) -> Result<f64> {
    let signal = received_power(tx_power, distance(tx_pos, rx_pos), params) * fading.gain();
    let interference: f64 = interferers
        .iter()
        .map(|e| received_power(e.power, distance(&e.position, rx_pos), params) * fading.gain())
        .sum();
    sinr_ratio(signal, interference, params.p_n, interferers.is_empty())
}
