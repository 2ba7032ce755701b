//! Behavioral model of the fast-mode sodium–potassium silicon neuron.
//!
//! Two state variables: the membrane voltage `v_m` on `C_m` and the potassium
//! gate voltage `v_n` on `C_N`. All channel currents are switched constants:
//!
//! * sodium `I_Na = i_na_max` while `v_m > v_th`, mirrored into `C_N`;
//! * potassium `I_K = i_k_max` and refractory sink `I_R = i_r` while
//!   `v_n > v_gate_th`;
//! * `C_N` discharges linearly toward ground with time constant `tau_n`.
//!
//! The membrane is held between `v_rest - 0.1 V` and the sodium rail `v_spike`.

use thiserror::Error;

/// Margin below `v_rest` the membrane may be pulled to by the potassium sink.
pub const UNDERSHOOT: f64 = 0.1;

/// Minimum number of integration steps per fastest model time constant.
pub const STEPS_PER_TAU: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum NeuronError {
    #[error("input current is not finite ({0})")]
    NonFiniteInput(f64),
    #[error("time step {dt:e} s violates stability bound {max:e} s")]
    UnstableStep { dt: f64, max: f64 },
    #[error("invalid neuron parameters: {0}")]
    InvalidParams(&'static str),
    #[error("no firing within {0:e} s of constant drive")]
    NoFiring(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronParams {
    /// Membrane capacitance (F).
    pub c_m: f64,
    /// Sodium activation (firing) threshold (V).
    pub v_th: f64,
    /// Peak sodium current (A); sets the up-swing rate and pulse width.
    pub i_na_max: f64,
    /// Spike peak, the sodium rail (V).
    pub v_spike: f64,
    /// Potassium gate capacitance (F).
    pub c_n: f64,
    /// Peak potassium sink current (A).
    pub i_k_max: f64,
    /// Refractory sink current (A).
    pub i_r: f64,
    /// Resting potential (V).
    pub v_rest: f64,
    /// Potassium gate activation threshold (V).
    pub v_gate_th: f64,
    /// Ratio between the sodium current and the `C_N` charging current.
    pub mirror_ratio: f64,
    /// Discharge time constant of the potassium gate (s).
    pub tau_n: f64,
}

impl NeuronParams {
    /// Calibrated preset: ~1 MHz tonic firing under a constant 1.5 µA drive,
    /// 2.5 V spikes, refractory phase about a fifth of the cycle.
    pub const PAPER_FAST_MODE: NeuronParams = NeuronParams {
        c_m: 1.2e-12,
        v_th: 0.6,
        i_na_max: 20e-6,
        v_spike: 2.5,
        c_n: 6e-12,
        i_k_max: 30e-6,
        i_r: 15e-6,
        v_rest: 0.0,
        v_gate_th: 0.5,
        mirror_ratio: 1.0,
        tau_n: 400e-9,
    };

    pub const PRESET_NAME: &'static str = "paper-fast-mode";

    pub fn validate(&self) -> Result<(), NeuronError> {
        let positive = [
            self.c_m,
            self.i_na_max,
            self.c_n,
            self.i_k_max,
            self.tau_n,
            self.mirror_ratio,
        ];
        if positive.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(NeuronError::InvalidParams(
                "capacitances, maximal currents, mirror ratio and tau_n must be positive",
            ));
        }
        if !(self.i_r.is_finite() && self.i_r >= 0.0) {
            return Err(NeuronError::InvalidParams("i_r must be non-negative"));
        }
        if !(self.v_rest < self.v_gate_th && self.v_gate_th < self.v_th && self.v_th < self.v_spike)
        {
            return Err(NeuronError::InvalidParams(
                "require v_rest < v_gate_th < v_th < v_spike",
            ));
        }
        if self.i_k_max + self.i_r <= self.i_na_max * 1.0 {
            return Err(NeuronError::InvalidParams(
                "potassium and refractory sinks must overcome the sodium current",
            ));
        }
        Ok(())
    }

    /// Fastest time scale of the switched dynamics: the gate leak, the
    /// sodium up-swing across the full swing, the gate charge-up to its
    /// threshold, and the net down-swing while sodium is still on.
    pub fn fastest_time_constant(&self) -> f64 {
        let swing = self.v_spike - self.v_rest;
        let up = self.c_m * swing / self.i_na_max;
        let gate = self.c_n * self.v_gate_th / (self.mirror_ratio * self.i_na_max);
        let down = self.c_m * swing / (self.i_k_max + self.i_r - self.i_na_max);
        self.tau_n.min(up).min(gate).min(down)
    }

    pub fn max_dt(&self) -> f64 {
        self.fastest_time_constant() / STEPS_PER_TAU
    }

    /// Time the gate stays above its threshold after a noiseless spike:
    /// the gate keeps charging through the down-swing, then leaks back.
    pub fn refractory_period(&self) -> f64 {
        let fall = self.c_m * (self.v_spike - self.v_th) / (self.i_k_max + self.i_r - self.i_na_max);
        let peak = self.v_gate_th + self.mirror_ratio * self.i_na_max * fall / self.c_n;
        let leak = self.tau_n * libm::log(peak / self.v_gate_th);
        fall + leak
    }

    pub fn v_min(&self) -> f64 {
        self.v_rest - UNDERSHOOT
    }
}

impl Default for NeuronParams {
    fn default() -> Self {
        Self::PAPER_FAST_MODE
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NeuronState {
    pub v_m: f64,
    pub v_n: f64,
}

impl NeuronState {
    pub fn at_rest(params: &NeuronParams) -> Self {
        NeuronState { v_m: params.v_rest, v_n: 0.0 }
    }

    pub fn refractory(&self, params: &NeuronParams) -> bool {
        self.v_n > params.v_gate_th
    }
}

/// Advances the neuron by `dt` with the input current held constant.
///
/// Between switching instants the membrane moves linearly and the gate
/// relaxes exponentially, so each step is integrated piecewise-exactly:
/// threshold crossings, gate flips and rail contacts are located inside the
/// step rather than snapped to the grid.
pub fn neuron_step(
    state: NeuronState,
    params: &NeuronParams,
    i_in: f64,
    dt: f64,
) -> Result<NeuronState, NeuronError> {
    if !i_in.is_finite() {
        return Err(NeuronError::NonFiniteInput(i_in));
    }
    let max = params.max_dt();
    if !(dt > 0.0 && dt <= max) {
        return Err(NeuronError::UnstableStep { dt, max });
    }
    Ok(advance(state, params, i_in, dt, f64::INFINITY).0)
}

// Each step crosses at most a handful of regime boundaries.
const MAX_EVENTS_PER_STEP: usize = 16;

/// Unchecked step. Also returns the offset within the step of the first
/// upward crossing of `detect`, if any.
#[inline]
pub(crate) fn advance(
    state: NeuronState,
    p: &NeuronParams,
    i_in: f64,
    dt: f64,
    detect: f64,
) -> (NeuronState, Option<f64>) {
    let v_min = p.v_min();
    let mut v_m = state.v_m;
    let mut v_n = state.v_n;
    let mut sodium = v_m > p.v_th;
    let mut gate = v_n > p.v_gate_th;
    let mut elapsed = 0.0;
    let mut crossing = None;

    for round in 0..=MAX_EVENTS_PER_STEP {
        let remaining = dt - elapsed;
        if remaining <= 0.0 {
            break;
        }
        let i_na = if sodium { p.i_na_max } else { 0.0 };
        let i_sink = if gate { p.i_k_max + p.i_r } else { 0.0 };
        let mut slope = (i_in + i_na - i_sink) / p.c_m;
        if (v_m <= v_min && slope < 0.0) || (v_m >= p.v_spike && slope > 0.0) {
            slope = 0.0;
        }
        let drive = p.mirror_ratio * i_na / p.c_n * p.tau_n;

        #[derive(Clone, Copy)]
        enum Event {
            Sodium,
            Gate,
            Rail(f64),
        }
        let mut next: Option<(f64, Event)> = None;
        let mut consider = |t: f64, e: Event| {
            if t >= 0.0 && next.map_or(true, |(best, _)| t < best) {
                next = Some((t, e));
            }
        };
        if sodium && slope < 0.0 || !sodium && slope > 0.0 {
            consider((p.v_th - v_m) / slope, Event::Sodium);
        }
        if slope > 0.0 {
            consider((p.v_spike - v_m) / slope, Event::Rail(p.v_spike));
        } else if slope < 0.0 {
            consider((v_min - v_m) / slope, Event::Rail(v_min));
        }
        if gate != (drive > p.v_gate_th) {
            let ratio = (v_n - drive) / (p.v_gate_th - drive);
            if ratio >= 1.0 {
                consider(p.tau_n * libm::log(ratio), Event::Gate);
            }
        }

        let (h, event) = match next {
            Some((t, e)) if t < remaining && round < MAX_EVENTS_PER_STEP => (t, Some(e)),
            _ => (remaining, None),
        };

        if crossing.is_none() && slope > 0.0 && v_m < detect {
            let t = (detect - v_m) / slope;
            if t <= h {
                crossing = Some(elapsed + t);
            }
        }

        v_m += slope * h;
        v_n = drive + (v_n - drive) * libm::exp(-h / p.tau_n);
        elapsed += h;

        match event {
            Some(Event::Sodium) => {
                v_m = p.v_th;
                sodium = !sodium;
            }
            Some(Event::Gate) => {
                v_n = p.v_gate_th;
                gate = !gate;
            }
            Some(Event::Rail(v)) => v_m = v,
            None => break,
        }
    }

    let v_m = v_m.clamp(v_min, p.v_spike);
    (NeuronState { v_m, v_n }, crossing)
}

/// Steady inter-spike period under constant drive, measured between onsets
/// (upward crossings of `v_th`) after discarding the first three spikes.
pub fn natural_period(params: &NeuronParams, i_const: f64, dt: f64) -> Result<f64, NeuronError> {
    params.validate()?;
    if !i_const.is_finite() {
        return Err(NeuronError::NonFiniteInput(i_const));
    }
    if !(i_const > 0.0) {
        return Err(NeuronError::NoFiring(0.0));
    }
    let max = params.max_dt();
    if !(dt > 0.0 && dt <= max) {
        return Err(NeuronError::UnstableStep { dt, max });
    }

    // Charging time from the undershoot to threshold, plus one spike cycle.
    let charge = params.c_m * (params.v_th - params.v_min()) / i_const;
    let expected = charge + 2.0 * params.refractory_period() + params.fastest_time_constant();
    let horizon = 100.0 * expected * 8.0;
    let max_steps = libm::ceil(horizon / dt) as u64;

    let discard = 3usize;
    let wanted = discard + 6;
    let mut onsets = [0.0f64; 9];
    let mut count = 0usize;

    let mut s = NeuronState::at_rest(params);
    let mut above = s.v_m > params.v_th;
    for k in 0..max_steps {
        let (next, crossing) = advance(s, params, i_const, dt, params.v_th);
        if let (Some(offset), false) = (crossing, above) {
            onsets[count] = k as f64 * dt + offset;
            count += 1;
            if count == wanted {
                break;
            }
        }
        above = next.v_m >= params.v_th;
        s = next;
    }
    if count < wanted {
        return Err(NeuronError::NoFiring(horizon));
    }
    let span = onsets[wanted - 1] - onsets[discard];
    Ok(span / (wanted - 1 - discard) as f64)
}
