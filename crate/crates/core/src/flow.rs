//! Ground-truth differential surface pressure over the suction side.
//!
//! The mean field is affine in angle of attack while the boundary layer is
//! attached and blends logistically into a constant plateau behind a
//! separation front that sweeps from the trailing edge (at `te_separation_aoa`)
//! to the leading edge (at `full_separation_aoa`). Fluctuations are a Gaussian
//! bump centred on the front plus a post-stall floor, realized as unit-variance
//! first-order autoregressive noise.

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::seed;
use crate::series::TimeSeries;

/// Upper bound on samples generated for one series.
pub const MAX_SERIES_SAMPLES: usize = 1 << 28;

/// Default master sampling rate for ground-truth series, Hz.
pub const DEFAULT_MASTER_RATE: f64 = 2048.0;

/// `0.5·ρ·U²` in Pa.
pub fn dynamic_pressure(air_density: f64, wind_speed: f64) -> Result<f64> {
    if !(air_density.is_finite() && air_density > 0.0) {
        return Err(Error::validation(
            "air_density",
            format!("must be positive and finite, got {air_density}"),
        ));
    }
    if !(wind_speed.is_finite() && wind_speed >= 0.0) {
        return Err(Error::validation(
            "wind_speed",
            format!("must be non-negative and finite, got {wind_speed}"),
        ));
    }
    Ok(0.5 * air_density * wind_speed * wind_speed)
}

/// Free-stream state of the tunnel.
///
/// Dynamic pressure and free-stream static pressure are always derived from the
/// stored fields, so they can never drift out of sync with them. The
/// stagnation factor `β` scales the Bernoulli relation
/// `P_atm = P∞ + β·q∞`; `β = 1` is the ideal relation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConditions {
    wind_speed: f64,
    air_density: f64,
    atmospheric_pressure: f64,
    stagnation_factor: f64,
    reynolds: f64,
    mach: f64,
}

impl FlowConditions {
    pub const DEFAULT_AIR_DENSITY: f64 = 1.225;
    pub const DEFAULT_ATMOSPHERIC_PRESSURE: f64 = 101_325.0;
    pub const DEFAULT_REYNOLDS: f64 = 3.5e6;
    pub const DEFAULT_MACH: f64 = 0.12;

    pub fn new(
        wind_speed: f64,
        air_density: f64,
        atmospheric_pressure: f64,
        stagnation_factor: f64,
    ) -> Result<Self> {
        Self::with_similarity(
            wind_speed,
            air_density,
            atmospheric_pressure,
            stagnation_factor,
            Self::DEFAULT_REYNOLDS,
            Self::DEFAULT_MACH,
        )
    }

    pub fn with_similarity(
        wind_speed: f64,
        air_density: f64,
        atmospheric_pressure: f64,
        stagnation_factor: f64,
        reynolds: f64,
        mach: f64,
    ) -> Result<Self> {
        dynamic_pressure(air_density, wind_speed)?;
        if !(atmospheric_pressure.is_finite() && atmospheric_pressure > 0.0) {
            return Err(Error::validation(
                "atmospheric_pressure",
                format!("must be positive and finite, got {atmospheric_pressure}"),
            ));
        }
        if !(stagnation_factor.is_finite() && stagnation_factor > 0.0) {
            return Err(Error::validation(
                "stagnation_factor",
                format!("must be positive and finite, got {stagnation_factor}"),
            ));
        }
        for (field, value) in [("reynolds", reynolds), ("mach", mach)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::validation(
                    field,
                    format!("must be non-negative and finite, got {value}"),
                ));
            }
        }
        Ok(FlowConditions {
            wind_speed,
            air_density,
            atmospheric_pressure,
            stagnation_factor,
            reynolds,
            mach,
        })
    }

    /// Wind tunnel at 40 m/s, sea-level density, ideal Bernoulli relation.
    pub fn tunnel_default() -> Self {
        Self::new(
            40.0,
            Self::DEFAULT_AIR_DENSITY,
            Self::DEFAULT_ATMOSPHERIC_PRESSURE,
            1.0,
        )
        .expect("default conditions are valid")
    }

    /// Same state with the fan off.
    pub fn wind_off(&self) -> Self {
        FlowConditions {
            wind_speed: 0.0,
            ..*self
        }
    }

    pub fn with_stagnation_factor(&self, stagnation_factor: f64) -> Result<Self> {
        Self::with_similarity(
            self.wind_speed,
            self.air_density,
            self.atmospheric_pressure,
            stagnation_factor,
            self.reynolds,
            self.mach,
        )
    }

    pub fn wind_speed(&self) -> f64 {
        self.wind_speed
    }

    pub fn air_density(&self) -> f64 {
        self.air_density
    }

    pub fn atmospheric_pressure(&self) -> f64 {
        self.atmospheric_pressure
    }

    pub fn stagnation_factor(&self) -> f64 {
        self.stagnation_factor
    }

    pub fn reynolds(&self) -> f64 {
        self.reynolds
    }

    pub fn mach(&self) -> f64 {
        self.mach
    }

    /// `q∞ = 0.5·ρ·U∞²`.
    pub fn dynamic_pressure(&self) -> f64 {
        0.5 * self.air_density * self.wind_speed * self.wind_speed
    }

    /// `P∞ = P_atm − β·q∞`.
    pub fn free_stream_pressure(&self) -> f64 {
        self.atmospheric_pressure - self.stagnation_factor * self.dynamic_pressure()
    }
}

impl Default for FlowConditions {
    fn default() -> Self {
        Self::tunnel_default()
    }
}

/// Wire form of [`FlowConditions`]. Derived quantities are emitted for
/// readability and, when present on input, must agree with the recomputed ones.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowConditionsRecord {
    wind_speed: f64,
    #[serde(default = "default_air_density")]
    air_density: f64,
    #[serde(default = "default_atmospheric_pressure")]
    atmospheric_pressure: f64,
    #[serde(default = "default_stagnation_factor")]
    stagnation_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dynamic_pressure: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    free_stream_pressure: Option<f64>,
    #[serde(default = "default_reynolds")]
    reynolds: f64,
    #[serde(default = "default_mach")]
    mach: f64,
}

fn default_air_density() -> f64 {
    FlowConditions::DEFAULT_AIR_DENSITY
}
fn default_atmospheric_pressure() -> f64 {
    FlowConditions::DEFAULT_ATMOSPHERIC_PRESSURE
}
fn default_stagnation_factor() -> f64 {
    1.0
}
fn default_reynolds() -> f64 {
    FlowConditions::DEFAULT_REYNOLDS
}
fn default_mach() -> f64 {
    FlowConditions::DEFAULT_MACH
}

impl Serialize for FlowConditions {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        FlowConditionsRecord {
            wind_speed: self.wind_speed,
            air_density: self.air_density,
            atmospheric_pressure: self.atmospheric_pressure,
            stagnation_factor: self.stagnation_factor,
            dynamic_pressure: Some(self.dynamic_pressure()),
            free_stream_pressure: Some(self.free_stream_pressure()),
            reynolds: self.reynolds,
            mach: self.mach,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for FlowConditions {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let r = FlowConditionsRecord::deserialize(deserializer)?;
        let fc = FlowConditions::with_similarity(
            r.wind_speed,
            r.air_density,
            r.atmospheric_pressure,
            r.stagnation_factor,
            r.reynolds,
            r.mach,
        )
        .map_err(D::Error::custom)?;
        let consistent = |given: Option<f64>, derived: f64| {
            given.map_or(true, |g| (g - derived).abs() <= 1e-9 * derived.abs().max(1.0))
        };
        if !consistent(r.dynamic_pressure, fc.dynamic_pressure()) {
            return Err(D::Error::custom(
                "dynamic_pressure disagrees with 0.5*air_density*wind_speed^2",
            ));
        }
        if !consistent(r.free_stream_pressure, fc.free_stream_pressure()) {
            return Err(D::Error::custom(
                "free_stream_pressure disagrees with atmospheric_pressure - stagnation_factor*dynamic_pressure",
            ));
        }
        Ok(fc)
    }
}

/// Sensor technology at a chord station.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SensorKind {
    Mems,
    Tap,
}

impl SensorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SensorKind::Mems => "mems",
            SensorKind::Tap => "tap",
        }
    }
}

impl std::fmt::Display for SensorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for SensorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mems" => Ok(SensorKind::Mems),
            "tap" => Ok(SensorKind::Tap),
            other => Err(Error::validation(
                "kind",
                format!("expected `mems` or `tap`, got `{other}`"),
            )),
        }
    }
}

/// A measurement location along the chord.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChordStation {
    pub position: f64,
    pub kind: SensorKind,
    #[serde(default)]
    pub label: String,
}

impl ChordStation {
    pub fn new(position: f64, kind: SensorKind, label: impl Into<String>) -> Result<Self> {
        let station = ChordStation {
            position,
            kind,
            label: label.into(),
        };
        station.validate()?;
        Ok(station)
    }

    /// Station labelled `<kind>@<x/c>`.
    pub fn unlabelled(position: f64, kind: SensorKind) -> Result<Self> {
        Self::new(position, kind, format!("{kind}@{position}"))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.position.is_finite() && (0.0..=1.0).contains(&self.position)) {
            return Err(Error::validation(
                "position",
                format!("chord fraction must lie in [0, 1], got {}", self.position),
            ));
        }
        Ok(())
    }

    /// Same chord location and sensor kind; labels are ignored.
    pub fn same_site(&self, other: &ChordStation) -> bool {
        self.kind == other.kind && self.position == other.position
    }
}

/// Coefficients of the synthetic pressure field. All pressures in Pa, angles in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowModelParams {
    pub linear_regime: [f64; 2],
    pub te_separation_aoa: f64,
    pub full_separation_aoa: f64,
    pub plateau_pressure: f64,
    /// `(s0, s1)` with slope `m(x) = −(s0 − s1·x)` Pa/deg.
    pub slope_coeffs: [f64; 2],
    pub offset_pressure: f64,
    pub blend_width: f64,
    pub base_std: f64,
    pub peak_std: f64,
    pub peak_width: f64,
    pub stall_std: f64,
    pub fluctuation_cutoff: f64,
}

impl Default for FlowModelParams {
    fn default() -> Self {
        FlowModelParams {
            linear_regime: [-10.0, 8.0],
            te_separation_aoa: 10.0,
            full_separation_aoa: 26.0,
            plateau_pressure: -500.0,
            slope_coeffs: [150.0, 140.0],
            offset_pressure: -100.0,
            blend_width: 0.03,
            base_std: 15.0,
            peak_std: 120.0,
            peak_width: 0.08,
            stall_std: 60.0,
            fluctuation_cutoff: 20.0,
        }
    }
}

impl FlowModelParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("te_separation_aoa", self.te_separation_aoa),
            ("full_separation_aoa", self.full_separation_aoa),
            ("plateau_pressure", self.plateau_pressure),
            ("offset_pressure", self.offset_pressure),
            ("blend_width", self.blend_width),
            ("base_std", self.base_std),
            ("peak_std", self.peak_std),
            ("peak_width", self.peak_width),
            ("stall_std", self.stall_std),
            ("fluctuation_cutoff", self.fluctuation_cutoff),
            ("linear_regime[0]", self.linear_regime[0]),
            ("linear_regime[1]", self.linear_regime[1]),
            ("slope_coeffs[0]", self.slope_coeffs[0]),
            ("slope_coeffs[1]", self.slope_coeffs[1]),
        ];
        for (field, value) in scalars {
            ensure_finite(field, value)?;
        }
        if self.linear_regime[0] >= self.linear_regime[1] {
            return Err(Error::validation(
                "linear_regime",
                "lower bound must be below upper bound",
            ));
        }
        if self.te_separation_aoa >= self.full_separation_aoa {
            return Err(Error::validation(
                "te_separation_aoa",
                format!(
                    "must be below full_separation_aoa ({} >= {})",
                    self.te_separation_aoa, self.full_separation_aoa
                ),
            ));
        }
        if self.blend_width <= 0.0 {
            return Err(Error::validation("blend_width", "must be positive"));
        }
        if self.peak_width <= 0.0 {
            return Err(Error::validation("peak_width", "must be positive"));
        }
        for (field, value) in [
            ("base_std", self.base_std),
            ("peak_std", self.peak_std),
            ("stall_std", self.stall_std),
        ] {
            if value < 0.0 {
                return Err(Error::validation(field, "must be non-negative"));
            }
        }
        if self.plateau_pressure >= 0.0 {
            return Err(Error::validation("plateau_pressure", "must be negative"));
        }
        if self.fluctuation_cutoff <= 0.0 {
            return Err(Error::validation("fluctuation_cutoff", "must be positive"));
        }
        Ok(())
    }

    /// Chordwise position of the separation front. 1 while attached, 0 once fully separated.
    pub fn separation_front(&self, aoa: f64) -> f64 {
        if aoa <= self.te_separation_aoa {
            return 1.0;
        }
        let span = self.full_separation_aoa - self.te_separation_aoa;
        (1.0 - (aoa - self.te_separation_aoa) / span).clamp(0.0, 1.0)
    }

    /// Angle at which the front reaches chord position `x` (inverse of [`separation_front`]).
    ///
    /// [`separation_front`]: FlowModelParams::separation_front
    pub fn front_arrival_aoa(&self, x: f64) -> f64 {
        self.te_separation_aoa + (1.0 - x) * (self.full_separation_aoa - self.te_separation_aoa)
    }

    /// Attached-flow slope `m(x)` in Pa/deg.
    pub fn attached_slope(&self, x: f64) -> f64 {
        -(self.slope_coeffs[0] - self.slope_coeffs[1] * x)
    }

    /// Weight of the plateau at `x` for angle `aoa`, in (0, 1).
    pub fn separation_weight(&self, x: f64, aoa: f64) -> f64 {
        let z = (x - self.separation_front(aoa)) / self.blend_width;
        1.0 / (1.0 + (-z).exp())
    }

    /// Mean differential pressure at chord position `x`.
    pub fn mean_pressure_at(&self, x: f64, aoa: f64) -> f64 {
        let attached = self.attached_slope(x) * aoa + self.offset_pressure;
        let w = self.separation_weight(x, aoa);
        w * self.plateau_pressure + (1.0 - w) * attached
    }

    pub fn mean_pressure(&self, station: &ChordStation, aoa: f64) -> f64 {
        self.mean_pressure_at(station.position, aoa)
    }

    /// Standard deviation of the pressure fluctuations at chord position `x`.
    pub fn fluctuation_std_at(&self, x: f64, aoa: f64) -> f64 {
        if aoa < self.te_separation_aoa {
            self.base_std
        } else if aoa < self.full_separation_aoa {
            let u = (x - self.separation_front(aoa)) / self.peak_width;
            self.base_std + self.peak_std * (-u * u).exp()
        } else {
            self.base_std + self.stall_std
        }
    }

    pub fn fluctuation_std(&self, station: &ChordStation, aoa: f64) -> f64 {
        self.fluctuation_std_at(station.position, aoa)
    }

    /// Copy with the trailing-edge separation angle moved by `delta` degrees.
    pub fn with_te_shift(&self, delta: f64) -> Self {
        FlowModelParams {
            te_separation_aoa: self.te_separation_aoa + delta,
            ..self.clone()
        }
    }
}

/// AR(1) coefficient for a first-order process with cutoff `cutoff` sampled at `rate`.
pub fn ar_coefficient(cutoff: f64, rate: f64) -> f64 {
    (-2.0 * std::f64::consts::PI * cutoff / rate).exp()
}

/// Sampled ground-truth differential pressure: mean field plus `σ·n[k]`, where
/// `n` is stationary unit-variance AR(1) noise with coefficient
/// `exp(−2π·f_c/master_rate)`. Deterministic in `seed`.
pub fn ground_truth_series(
    station: &ChordStation,
    aoa: f64,
    params: &FlowModelParams,
    duration: f64,
    master_rate: f64,
    seed: u64,
) -> Result<TimeSeries> {
    params.validate()?;
    station.validate()?;
    ensure_finite("aoa", aoa)?;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(Error::validation("duration", format!("must be positive, got {duration}")));
    }
    if !(master_rate.is_finite() && master_rate >= 2.0 * params.fluctuation_cutoff) {
        return Err(Error::validation(
            "master_rate",
            format!(
                "must be at least twice the fluctuation cutoff ({} Hz), got {master_rate}",
                2.0 * params.fluctuation_cutoff
            ),
        ));
    }
    let n = duration * master_rate;
    if !(n.round() <= MAX_SERIES_SAMPLES as f64) {
        return Err(Error::validation(
            "duration",
            format!("{n:.0} samples exceed the per-series budget of {MAX_SERIES_SAMPLES}"),
        ));
    }
    let n = n.round() as usize;
    if n < 1 {
        return Err(Error::validation("duration", "shorter than one sample"));
    }

    let mean = params.mean_pressure(station, aoa);
    let sigma = params.fluctuation_std(station, aoa);
    let channel = format!("truth@{}", station.position);
    if sigma == 0.0 {
        return TimeSeries::new(channel, 0.0, master_rate, vec![mean; n]);
    }

    let a = ar_coefficient(params.fluctuation_cutoff, master_rate);
    let innovation = (1.0 - a * a).sqrt();
    let mut rng = seed::rng(seed);
    let mut state: f64 = StandardNormal.sample(&mut rng);
    let mut values = Vec::with_capacity(n);
    values.push(mean + sigma * state);
    for _ in 1..n {
        let e: f64 = StandardNormal.sample(&mut rng);
        state = a * state + innovation * e;
        values.push(mean + sigma * state);
    }
    TimeSeries::new(channel, 0.0, master_rate, values)
}
