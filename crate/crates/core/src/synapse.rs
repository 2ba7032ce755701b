//! Current-mode low-pass synapses: the linear first-order reference filter and
//! the differential-pair integrator (DPI).

use thiserror::Error;

/// Thermal voltage at 300 K.
pub const THERMAL_VOLTAGE_300K: f64 = 0.025_85;

/// Leakage floor relative to `i_tau`. The DPI gain term vanishes at zero
/// output, so the state is held at `i_tau * FLOOR_RATIO` instead.
pub const FLOOR_RATIO: f64 = 1e-6;

/// Largest change of `ln(i_out)` allowed in one internal Euler substep.
const MAX_LOG_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SynapseError {
    #[error("synapse input current must be a finite non-negative magnitude, got {0}")]
    NegativeInput(f64),
    #[error("time step {dt:e} s exceeds tau/10 = {max:e} s")]
    UnstableStep { dt: f64, max: f64 },
    #[error("invalid synapse parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Excitatory,
    Inhibitory,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Excitatory => 1.0,
            Polarity::Inhibitory => -1.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Excitatory => "excitatory",
            Polarity::Inhibitory => "inhibitory",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseParams {
    /// Synapse capacitor (F).
    pub c_s: f64,
    /// Leak bias current `I_tau` (A).
    pub i_tau: f64,
    /// Sub-threshold slope factor.
    pub kappa: f64,
    /// Thermal voltage (V).
    pub u_t: f64,
    pub polarity: Polarity,
    /// Input current while a presynaptic pulse is on (A).
    pub i_pulse: f64,
    /// Duration of the input pulse per presynaptic spike (s).
    pub pulse_width: f64,
}

impl SynapseParams {
    /// Calibrated so a single presynaptic spike drives a quiet neuron of the
    /// `paper-fast-mode` preset across threshold (about 1.5 pC per spike,
    /// tau near 100 ns).
    pub const PAPER_DPI: SynapseParams = SynapseParams {
        c_s: 0.28e-12,
        i_tau: 100e-9,
        kappa: 0.7,
        u_t: THERMAL_VOLTAGE_300K,
        polarity: Polarity::Excitatory,
        i_pulse: 15e-6,
        pulse_width: 100e-9,
    };

    pub const PRESET_NAME: &'static str = "paper-dpi";

    pub fn validate(&self) -> Result<(), SynapseError> {
        let positive = [self.c_s, self.i_tau, self.u_t, self.i_pulse, self.pulse_width];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(SynapseError::InvalidParams(
                "c_s, i_tau, u_t, i_pulse and pulse_width must be positive",
            ));
        }
        if !(self.kappa > 0.0 && self.kappa <= 1.0) {
            return Err(SynapseError::InvalidParams("kappa must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn with_polarity(self, polarity: Polarity) -> Self {
        SynapseParams { polarity, ..self }
    }

    pub fn i_floor(&self) -> f64 {
        self.i_tau * FLOOR_RATIO
    }

    pub fn max_dt(&self) -> f64 {
        time_constant(self) / 10.0
    }
}

impl Default for SynapseParams {
    fn default() -> Self {
        Self::PAPER_DPI
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynapseState {
    /// Output current magnitude (A); polarity is applied at the target.
    pub i_out: f64,
}

impl SynapseState {
    pub fn at_floor(params: &SynapseParams) -> Self {
        SynapseState { i_out: params.i_floor() }
    }
}

/// `tau = C_s U_T / (kappa I_tau)`.
pub fn time_constant(params: &SynapseParams) -> f64 {
    params.c_s * params.u_t / (params.kappa * params.i_tau)
}

/// One step of the DPI law `tau dI/dt = -I + I_in (I/I_tau) / (1 + I/I_tau)`.
///
/// The step is explicit Euler on `ln(i_out)`, split into substeps so that no
/// substep moves the log-current by more than 1%. With no input the law is
/// linear and the decay is taken exactly.
pub fn dpi_step(
    state: SynapseState,
    params: &SynapseParams,
    i_in: f64,
    dt: f64,
) -> Result<SynapseState, SynapseError> {
    if !(i_in.is_finite() && i_in >= 0.0) {
        return Err(SynapseError::NegativeInput(i_in));
    }
    let max = params.max_dt();
    if !(dt > 0.0 && dt <= max) {
        return Err(SynapseError::UnstableStep { dt, max });
    }
    Ok(dpi_advance(state, params, time_constant(params), i_in, dt, &mut 0.0))
}

/// Advances the DPI by `dt` under constant input, adding the charge delivered
/// by `i_out` over the interval to `charge`.
#[inline]
pub(crate) fn dpi_advance(
    state: SynapseState,
    p: &SynapseParams,
    tau: f64,
    i_in: f64,
    dt: f64,
    charge: &mut f64,
) -> SynapseState {
    let floor = p.i_floor();
    let mut i = state.i_out.max(floor);
    if i_in == 0.0 {
        if i <= floor {
            *charge += floor * dt;
            return SynapseState { i_out: floor };
        }
        // Pure decay until the floor is reached, then flat.
        let t_hit = tau * libm::log(i / floor);
        if t_hit >= dt {
            let decay = libm::exp(-dt / tau);
            *charge += i * tau * (1.0 - decay);
            return SynapseState { i_out: (i * decay).max(floor) };
        }
        *charge += (i - floor) * tau + floor * (dt - t_hit);
        return SynapseState { i_out: floor };
    }
    // RK4 on (ln i_out, charge); steps bounded in log change.
    let rate = |y: f64| (i_in / (p.i_tau + libm::exp(y)) - 1.0) / tau;
    let mut y = libm::log(i);
    let mut remaining = dt;
    while remaining > 0.0 {
        let r = rate(y).abs();
        let h = if r * remaining > MAX_LOG_STEP { MAX_LOG_STEP / r } else { remaining };
        let k1 = rate(y);
        let k2 = rate(y + 0.5 * h * k1);
        let k3 = rate(y + 0.5 * h * k2);
        let k4 = rate(y + h * k3);
        let q1 = libm::exp(y);
        let q2 = libm::exp(y + 0.5 * h * k1);
        let q3 = libm::exp(y + 0.5 * h * k2);
        let q4 = libm::exp(y + h * k3);
        *charge += h / 6.0 * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        remaining -= h;
    }
    i = libm::exp(y).max(floor);
    SynapseState { i_out: i }
}

/// Advances the DPI over `[t, t + dt)` driven by the pulses of `spike_times`,
/// splitting the step at pulse edges so pulse durations are not quantized to
/// the grid. Only spikes at or before `t + dt` are visible.
pub fn dpi_step_pulsed(
    state: SynapseState,
    params: &SynapseParams,
    spike_times: &[f64],
    t: f64,
    dt: f64,
) -> Result<SynapseState, SynapseError> {
    let max = params.max_dt();
    if !(dt > 0.0 && dt <= max) {
        return Err(SynapseError::UnstableStep { dt, max });
    }
    let end = spike_times.partition_point(|&s| s < t + dt);
    let begin = spike_times[..end].partition_point(|&s| s + params.pulse_width <= t);
    Ok(pulsed_advance(state, params, time_constant(params), &spike_times[begin..end], t, dt, &mut 0.0))
}

/// Unchecked [`dpi_step_pulsed`] over only the spikes whose pulses overlap
/// the step. The charge delivered during the step is added to `charge`.
#[inline]
pub(crate) fn pulsed_advance(
    state: SynapseState,
    params: &SynapseParams,
    tau: f64,
    spikes: &[f64],
    t: f64,
    dt: f64,
    charge: &mut f64,
) -> SynapseState {
    let mut s = state;
    let mut cursor = t;
    for &spike in spikes {
        let on = spike.max(cursor);
        let off = (spike + params.pulse_width).min(t + dt);
        if off <= cursor {
            continue;
        }
        if on > cursor {
            s = dpi_advance(s, params, tau, 0.0, on - cursor, charge);
        }
        s = dpi_advance(s, params, tau, params.i_pulse, off - on, charge);
        cursor = off;
    }
    if t + dt > cursor {
        s = dpi_advance(s, params, tau, 0.0, t + dt - cursor, charge);
    }
    s
}

/// One explicit Euler step of the linear reference filter `tau dI/dt = -I + I_in`.
pub fn linear_step(state: SynapseState, tau: f64, i_in: f64, dt: f64) -> SynapseState {
    SynapseState { i_out: state.i_out + dt / tau * (i_in - state.i_out) }
}

/// Rectangular input drive from presynaptic spikes: `i_pulse` while `t` lies
/// within `pulse_width` after any spike at or before `t`. Overlapping pulses
/// merge rather than add. `spike_times` must be sorted ascending.
pub fn presynaptic_pulse(spike_times: &[f64], params: &SynapseParams, t: f64) -> f64 {
    let after = spike_times.partition_point(|&s| s <= t);
    match after.checked_sub(1).map(|k| spike_times[k]) {
        Some(last) if t - last < params.pulse_width => params.i_pulse,
        _ => 0.0,
    }
}
