//! Wireless/compute system model.
//!
//! Houses the physical side of the simulator: channel gains and achievable
//! rates, per-pair time/energy coefficients, the training time and energy of a
//! learner over a number of global cycles, and seeded topology generation.
//!
//! The per-pair coefficients collapse the send/update/compute pipeline into
//! six constants so that for allocation fraction `n`, local iterations `tau`
//! and global cycles `g`:
//!
//! ```text
//! time   = g * (a2 * tau * n + a1 * n + a0)        [seconds]
//! energy = g * (z2 * tau * n + z1 * n + z0)        [joules]
//! ```

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Wireless channel parameters shared by all links.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel {
    /// Channel bandwidth in Hz.
    pub bandwidth_w: f64,
    /// Transmission power in watts (same for every node).
    pub tx_power_p: f64,
    /// Channel noise variance in watts.
    pub noise_variance_sigma2: f64,
    /// Path loss exponent.
    pub pathloss_exponent_nu: f64,
    /// Fading amplitude coefficient (deterministic default).
    pub fading_g: f64,
}

impl ChannelModel {
    pub fn new(
        bandwidth_w: f64,
        tx_power_p: f64,
        noise_variance_sigma2: f64,
        pathloss_exponent_nu: f64,
        fading_g: f64,
    ) -> Result<Self> {
        let m = Self {
            bandwidth_w,
            tx_power_p,
            noise_variance_sigma2,
            pathloss_exponent_nu,
            fading_g,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("bandwidth_w", self.bandwidth_w),
            ("tx_power_p", self.tx_power_p),
            ("noise_variance_sigma2", self.noise_variance_sigma2),
            ("pathloss_exponent_nu", self.pathloss_exponent_nu),
            ("fading_g", self.fading_g),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::domain(format!("{name} must be strictly positive")));
            }
        }
        if self.pathloss_exponent_nu < 2.0 {
            return Err(Error::domain("pathloss_exponent_nu must be >= 2"));
        }
        Ok(())
    }
}

/// Learning task owned by one orchestrator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    /// Number of samples in the dataset.
    pub dataset_size_n: u64,
    /// Scalars per sample (feature vector length).
    pub feature_len_f: u32,
    /// Bits per feature scalar.
    pub bits_per_feature_gamma_d: u8,
    /// Bits per model weight.
    pub bits_per_weight_gamma_w: u8,
    /// Total number of weights in the model.
    pub weight_count_sw: u64,
    /// Processor cycles per sample per local iteration.
    pub compute_complexity_cw: u64,
}

impl TaskSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dataset_size_n == 0
            || self.feature_len_f == 0
            || self.weight_count_sw == 0
            || self.compute_complexity_cw == 0
        {
            return Err(Error::domain("task spec fields must be positive"));
        }
        for (name, bits) in [
            ("bits_per_feature_gamma_d", self.bits_per_feature_gamma_d),
            ("bits_per_weight_gamma_w", self.bits_per_weight_gamma_w),
        ] {
            if ![8, 16, 32, 64].contains(&bits) {
                return Err(Error::domain(format!("{name} must be one of 8/16/32/64")));
            }
        }
        Ok(())
    }

    /// Bits of model weights exchanged per direction.
    pub fn weight_bits(&self) -> f64 {
        self.weight_count_sw as f64 * self.bits_per_weight_gamma_w as f64
    }

    /// Bits of the full dataset (allocation fraction 1).
    pub fn data_bits(&self) -> f64 {
        self.dataset_size_n as f64 * self.feature_len_f as f64 * self.bits_per_feature_gamma_d as f64
    }
}

/// Edge device that trains on its allocated share of a task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    /// Local processor frequency in Hz.
    pub cpu_freq_f: f64,
    /// On-board chip capacitance constant.
    pub chip_capacitance_mu: f64,
    /// Distance to each orchestrator in meters.
    pub distances_m: Vec<f64>,
}

impl LearnerSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.cpu_freq_f > 0.0) {
            return Err(Error::domain("cpu_freq_f must be > 0"));
        }
        if !(self.chip_capacitance_mu > 0.0) {
            return Err(Error::domain("chip_capacitance_mu must be > 0"));
        }
        if self.distances_m.is_empty() || self.distances_m.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::domain("all distances must be > 0"));
        }
        Ok(())
    }
}

/// The six per-pair constants of the collapsed time/energy model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkCoefficients {
    /// Seconds per global cycle for the weight exchange (both directions).
    pub a0: f64,
    /// Seconds per global cycle per unit allocation for the data transfer.
    pub a1: f64,
    /// Seconds per global cycle per (unit allocation x iteration) of compute.
    pub a2: f64,
    /// Joules counterpart of `a0` (tx power times time).
    pub z0: f64,
    /// Joules counterpart of `a1`.
    pub z1: f64,
    /// Joules per (unit allocation x iteration) of on-board compute.
    pub z2: f64,
}

impl LinkCoefficients {
    /// Training time in seconds; assumes arguments already validated.
    #[inline]
    pub fn time(&self, n: f64, tau: u32, g: u32) -> f64 {
        g as f64 * (self.a2 * tau as f64 * n + self.a1 * n + self.a0)
    }

    /// Training energy in joules; assumes arguments already validated.
    #[inline]
    pub fn energy(&self, n: f64, tau: u32, g: u32) -> f64 {
        g as f64 * (self.z2 * tau as f64 * n + self.z1 * n + self.z0)
    }

    /// Per-cycle energy coefficient of the allocation-proportional part,
    /// `z2 * tau + z1`. This is the unit cost minimized by the allocation LP.
    #[inline]
    pub fn alloc_energy_rate(&self, tau: u32) -> f64 {
        self.z2 * tau as f64 + self.z1
    }
}

/// Channel gain `d^-nu * g^2`.
pub fn channel_gain(distance_m: f64, nu: f64, g: f64) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::domain("distance must be > 0"));
    }
    Ok(distance_m.powf(-nu) * g * g)
}

/// Shannon rate `W log2(1 + gain P / sigma^2)` in bits/second.
pub fn achievable_rate(channel: &ChannelModel, gain: f64) -> f64 {
    let snr = gain * channel.tx_power_p / channel.noise_variance_sigma2;
    channel.bandwidth_w * (1.0 + snr).log2()
}

/// Collapse the task/learner/channel triple into the six link constants.
pub fn link_coefficients(
    task: &TaskSpec,
    learner: &LearnerSpec,
    channel: &ChannelModel,
    rate_bps: f64,
) -> Result<LinkCoefficients> {
    if !(rate_bps > 0.0) {
        return Err(Error::domain("rate must be > 0 (unreachable learner)"));
    }
    let a0 = 2.0 * task.weight_bits() / rate_bps;
    let a1 = task.data_bits() / rate_bps;
    let a2 = task.dataset_size_n as f64 * task.compute_complexity_cw as f64 / learner.cpu_freq_f;
    Ok(LinkCoefficients {
        a0,
        a1,
        a2,
        z0: channel.tx_power_p * a0,
        z1: channel.tx_power_p * a1,
        z2: learner.chip_capacitance_mu * task.compute_complexity_cw as f64 * learner.cpu_freq_f,
    })
}

fn check_schedule(n: f64, tau: u32, g: u32) -> Result<()> {
    if !(0.0..=1.0).contains(&n) || !n.is_finite() {
        return Err(Error::domain(format!("allocation n={n} outside [0,1]")));
    }
    if tau < 1 {
        return Err(Error::domain("tau must be >= 1"));
    }
    if g < 1 {
        return Err(Error::domain("g must be >= 1"));
    }
    Ok(())
}

/// Total training time across `g` global cycles, seconds.
pub fn train_time(c: &LinkCoefficients, n: f64, tau: u32, g: u32) -> Result<f64> {
    check_schedule(n, tau, g)?;
    Ok(c.time(n, tau, g))
}

/// Total training energy across `g` global cycles, joules.
pub fn train_energy(c: &LinkCoefficients, n: f64, tau: u32, g: u32) -> Result<f64> {
    check_schedule(n, tau, g)?;
    Ok(c.energy(n, tau, g))
}

/// Parameters for seeded topology generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyConfig {
    pub orchestrators: usize,
    pub learners: usize,
    pub channel: ChannelModel,
    /// One task per orchestrator; a single entry is shared by all.
    pub tasks: Vec<TaskSpec>,
    /// Learner-orchestrator distances are drawn i.i.d. from this range (m).
    pub distance_range_m: (f64, f64),
    /// Processor frequencies are drawn uniformly from this pool (Hz).
    pub frequency_pool_hz: Vec<f64>,
    pub chip_capacitance_mu: f64,
    /// Draw per-pair Rayleigh fading amplitudes (unit mean square) instead of
    /// the deterministic `fading_g`.
    pub rayleigh_fading: bool,
}

impl TopologyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.orchestrators == 0 || self.learners == 0 {
            return Err(Error::domain("orchestrator and learner counts must be >= 1"));
        }
        self.channel.validate()?;
        if self.tasks.is_empty() {
            return Err(Error::domain("at least one task spec required"));
        }
        if self.tasks.len() != 1 && self.tasks.len() != self.orchestrators {
            return Err(Error::domain("tasks must have length 1 or orchestrator count"));
        }
        for t in &self.tasks {
            t.validate()?;
        }
        let (lo, hi) = self.distance_range_m;
        if !(lo > 0.0) || !(hi >= lo) {
            return Err(Error::domain("distance range must satisfy 0 < lo <= hi"));
        }
        if self.frequency_pool_hz.is_empty() || self.frequency_pool_hz.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::domain("frequency pool must be nonempty and positive"));
        }
        if !(self.chip_capacitance_mu > 0.0) {
            return Err(Error::domain("chip_capacitance_mu must be > 0"));
        }
        Ok(())
    }
}

/// Orchestrators, learners and precomputed per-pair channel state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTopology {
    pub channel: ChannelModel,
    pub tasks: Vec<TaskSpec>,
    pub learners: Vec<LearnerSpec>,
    /// Per (learner, orchestrator) channel gain; reciprocal by construction.
    gains: Vec<Vec<f64>>,
    /// Per (learner, orchestrator) link coefficients.
    coeffs: Vec<Vec<LinkCoefficients>>,
}

impl SystemTopology {
    /// Assemble a topology from explicit parts, computing gains and link
    /// coefficients. `fading` optionally overrides the amplitude per pair.
    pub fn assemble(
        channel: ChannelModel,
        tasks: Vec<TaskSpec>,
        learners: Vec<LearnerSpec>,
        fading: Option<&[Vec<f64>]>,
    ) -> Result<Self> {
        channel.validate()?;
        if tasks.is_empty() || learners.is_empty() {
            return Err(Error::domain("empty orchestrator or learner set"));
        }
        for t in &tasks {
            t.validate()?;
        }
        let n_orch = tasks.len();
        let mut gains = Vec::with_capacity(learners.len());
        let mut coeffs = Vec::with_capacity(learners.len());
        for (l, learner) in learners.iter().enumerate() {
            learner.validate()?;
            if learner.distances_m.len() != n_orch {
                return Err(Error::domain(format!(
                    "learner {l} has {} distances, expected {n_orch}",
                    learner.distances_m.len()
                )));
            }
            let mut grow = Vec::with_capacity(n_orch);
            let mut crow = Vec::with_capacity(n_orch);
            for (o, task) in tasks.iter().enumerate() {
                let g_amp = fading.map_or(channel.fading_g, |f| f[l][o]);
                let gain =
                    channel_gain(learner.distances_m[o], channel.pathloss_exponent_nu, g_amp)?;
                let rate = achievable_rate(&channel, gain);
                if !(rate > 0.0) {
                    return Err(Error::UnreachableLearner { learner: l, orchestrator: o });
                }
                grow.push(gain);
                crow.push(link_coefficients(task, learner, &channel, rate)?);
            }
            gains.push(grow);
            coeffs.push(crow);
        }
        Ok(Self { channel, tasks, learners, gains, coeffs })
    }

    pub fn orchestrator_count(&self) -> usize {
        self.tasks.len()
    }

    pub fn learner_count(&self) -> usize {
        self.learners.len()
    }

    #[inline]
    pub fn gain(&self, learner: usize, orchestrator: usize) -> f64 {
        self.gains[learner][orchestrator]
    }

    #[inline]
    pub fn coeff(&self, learner: usize, orchestrator: usize) -> &LinkCoefficients {
        &self.coeffs[learner][orchestrator]
    }
}

/// Draw a topology from the configured ranges; identical for identical seeds.
pub fn generate_topology(config: &TopologyConfig, seed: u64) -> Result<SystemTopology> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (d_lo, d_hi) = config.distance_range_m;
    let n_orch = config.orchestrators;

    let tasks: Vec<TaskSpec> = if config.tasks.len() == 1 {
        vec![config.tasks[0].clone(); n_orch]
    } else {
        config.tasks.clone()
    };

    let mut learners = Vec::with_capacity(config.learners);
    let mut fading: Vec<Vec<f64>> = Vec::with_capacity(config.learners);
    for _ in 0..config.learners {
        let cpu = *config
            .frequency_pool_hz
            .choose(&mut rng)
            .expect("nonempty pool");
        let distances: Vec<f64> = (0..n_orch).map(|_| rng.gen_range(d_lo..=d_hi)).collect();
        let row: Vec<f64> = (0..n_orch)
            .map(|_| {
                if config.rayleigh_fading {
                    // Rayleigh amplitude with E[g^2] = 1.
                    let u: f64 = rng.gen_range(f64::EPSILON..1.0);
                    (-u.ln()).sqrt()
                } else {
                    config.channel.fading_g
                }
            })
            .collect();
        fading.push(row);
        learners.push(LearnerSpec {
            cpu_freq_f: cpu,
            chip_capacitance_mu: config.chip_capacitance_mu,
            distances_m: distances,
        });
    }
    SystemTopology::assemble(config.channel.clone(), tasks, learners, Some(&fading))
}
