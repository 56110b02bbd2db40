//! Run configuration: JSON file plus command-line overrides, resolved to SI
//! values and checked before any computation.

use std::path::{Path, PathBuf};

use biphoton::coincidence::DetectorModel;
use biphoton::dispersion::{check_degenerate, ParaxialAction, ParaxialGuard};
use biphoton::entanglement::{EntanglementConfig, Scenario};
use biphoton::fields::{AmplitudeOptions, ExtentPolicy, MomentumGrid4};
use biphoton::{CrystalSetup, PumpSpec, SellmeierModel, SpdcSource};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};
use crate::units::{Angle, Length};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "BIPHOTON_OUT";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub pump: PumpConfig,
    pub crystal: CrystalConfig,
    /// Distance from the crystal to the detection plane. Defaults to 5 mm
    /// (single) or 7.5 mm (double).
    pub z: Option<Length>,
    pub grid: GridConfig,
    pub entanglement: EntanglementConfig,
    pub coincidence: CoincidenceConfig,
    pub paraxial: ParaxialConfig,
    /// Sellmeier coefficient file; the embedded BBO set when absent.
    pub sellmeier: Option<PathBuf>,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PumpConfig {
    pub wavelength: Length,
    pub signal_wavelength: Length,
    pub waist: Length,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self {
            wavelength: Length(355e-9),
            signal_wavelength: Length(710e-9),
            waist: Length(507e-6),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CrystalKindName {
    #[default]
    Single,
    Double,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrystalConfig {
    pub kind: CrystalKindName,
    /// Length of one crystal: 5 mm (single) or 1 mm (double) by default.
    pub length: Option<Length>,
    pub gap: Option<Length>,
    /// 32.9 deg (single) or 32.93 deg (double) by default.
    pub theta_p: Option<Angle>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    /// Points per transverse axis of the 4D grid.
    pub n: usize,
    /// Defaults to `c1 = 6, c2 = 1.5` (single) or `c2 = 0.7` (double).
    pub extent: Option<ExtentPolicy>,
    pub truncation_limit: f64,
    pub memory_budget: u64,
}

impl Default for GridConfig {
    fn default() -> Self {
        let opts = AmplitudeOptions::default();
        Self {
            n: 64,
            extent: None,
            truncation_limit: opts.truncation_limit,
            memory_budget: opts.memory_budget,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub pitch: Length,
    pub quantum_efficiency: f64,
    pub dark_rate: f64,
    /// `[columns, rows]`.
    pub roi: [usize; 2],
}

impl Default for DetectorConfig {
    fn default() -> Self {
        let d = DetectorModel::default();
        Self {
            pitch: Length(d.pitch),
            quantum_efficiency: d.quantum_efficiency,
            dark_rate: d.dark_rate,
            roi: [d.roi.0, d.roi.1],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoincidenceConfig {
    pub detector: DetectorConfig,
    pub mu_pairs: f64,
    pub n_frames: usize,
    pub seed: u64,
}

impl Default for CoincidenceConfig {
    fn default() -> Self {
        Self {
            detector: DetectorConfig::default(),
            mu_pairs: 5.0,
            n_frames: 10_000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParaxialConfig {
    pub max_ratio: f64,
    pub action: ParaxialAction,
}

impl Default for ParaxialConfig {
    fn default() -> Self {
        let g = ParaxialGuard::default();
        Self {
            max_ratio: g.max_ratio,
            action: g.action,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Grd1,
    Csv,
    Pgm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub formats: Vec<Format>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: None,
            formats: vec![Format::Grd1, Format::Csv, Format::Pgm],
        }
    }
}

/// Values given on the command line; each replaces the file value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub lambda_p: Option<Length>,
    pub lambda_s: Option<Length>,
    pub waist: Option<Length>,
    pub theta_p: Option<Angle>,
    pub length: Option<Length>,
    pub double: bool,
    pub gap: Option<Length>,
    pub z: Option<Length>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub mu_pairs: Option<f64>,
    pub frames: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
    pub sellmeier: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config(format!("{path}: {}", e.into_inner()))
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if o.gap.is_some() && !o.double && self.crystal.kind != CrystalKindName::Double {
            return Err(CliError::Config(
                "--d requires --double (or crystal.kind = \"double\")".into(),
            ));
        }
        if o.double {
            self.crystal.kind = CrystalKindName::Double;
        }
        macro_rules! set {
            ($src:expr => $dst:expr) => {
                if let Some(v) = $src.clone() {
                    $dst = v;
                }
            };
        }
        set!(o.lambda_p => self.pump.wavelength);
        set!(o.lambda_s => self.pump.signal_wavelength);
        set!(o.waist => self.pump.waist);
        set!(o.n => self.grid.n);
        set!(o.m => self.entanglement.fine_n);
        set!(o.mu_pairs => self.coincidence.mu_pairs);
        set!(o.frames => self.coincidence.n_frames);
        set!(o.seed => self.coincidence.seed);
        set!(o.formats => self.output.formats);
        if o.theta_p.is_some() {
            self.crystal.theta_p = o.theta_p;
        }
        if o.length.is_some() {
            self.crystal.length = o.length;
        }
        if o.gap.is_some() {
            self.crystal.gap = o.gap;
        }
        if o.z.is_some() {
            self.z = o.z;
        }
        if o.out.is_some() {
            self.output.dir = o.out.clone();
        }
        if o.sellmeier.is_some() {
            self.sellmeier = o.sellmeier.clone();
        }
        Ok(())
    }

    /// Fills defaults, checks every precondition and computes the fingerprint.
    pub fn resolve(&self) -> Result<Resolved> {
        let bad = |key: &str, msg: String| CliError::Config(format!("{key}: {msg}"));
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(bad(key, format!("must be positive and finite, got {v}")))
            }
        };

        let model = match &self.sellmeier {
            Some(p) => std::fs::read_to_string(p)?
                .parse::<SellmeierModel>()
                .map_err(|e| bad("sellmeier", format!("{}: {e}", p.display())))?,
            None => SellmeierModel::bbo(),
        };

        let lambda_p = positive("pump.wavelength", self.pump.wavelength.si())?;
        let lambda_s = positive("pump.signal_wavelength", self.pump.signal_wavelength.si())?;
        check_degenerate(lambda_p, lambda_s).map_err(|e| bad("pump.signal_wavelength", e.to_string()))?;
        let pump = PumpSpec {
            lambda_p,
            waist: positive("pump.waist", self.pump.waist.si())?,
        };

        let double = self.crystal.kind == CrystalKindName::Double;
        let length = positive(
            "crystal.length",
            self.crystal
                .length
                .map_or(if double { 1e-3 } else { 5e-3 }, Length::si),
        )?;
        let theta_p = self
            .crystal
            .theta_p
            .map_or((if double { 32.93f64 } else { 32.9 }).to_radians(), Angle::si);
        if !(theta_p > 0.0 && theta_p < std::f64::consts::FRAC_PI_2) {
            return Err(bad(
                "crystal.theta_p",
                format!("{} deg is outside (0, 90) deg", theta_p.to_degrees()),
            ));
        }
        let setup = if double {
            let gap = self
                .crystal
                .gap
                .ok_or_else(|| bad("crystal.gap", "required for a double crystal".into()))?
                .si();
            if !(gap >= 0.0 && gap.is_finite()) {
                return Err(bad("crystal.gap", format!("must be non-negative, got {gap}")));
            }
            CrystalSetup::double(length, gap, theta_p)
        } else {
            if self.crystal.gap.is_some() {
                return Err(bad("crystal.gap", "only valid for kind \"double\"".into()));
            }
            CrystalSetup::single(length, theta_p)
        };
        setup.validate().map_err(|e| bad("crystal", e.to_string()))?;

        let z = self.z.map_or(if double { 7.5e-3 } else { 5e-3 }, Length::si);
        if !z.is_finite() {
            return Err(bad("z", "must be finite".into()));
        }

        let n = self.grid.n;
        if n < 8 || !n.is_power_of_two() {
            return Err(bad("grid.n", format!("must be a power of two >= 8, got {n}")));
        }
        let extent = self.grid.extent.unwrap_or(if double {
            ExtentPolicy { c1: 6.0, c2: 0.7 }
        } else {
            ExtentPolicy::default()
        });
        if !(extent.c1 >= 0.0 && extent.c2 >= 0.0 && extent.c1 + extent.c2 > 0.0) {
            return Err(bad(
                "grid.extent",
                "coefficients must be non-negative and not both zero".into(),
            ));
        }
        if !(self.grid.truncation_limit > 0.0) {
            return Err(bad("grid.truncation_limit", "must be positive".into()));
        }
        let amplitude = AmplitudeOptions {
            truncation_limit: self.grid.truncation_limit,
            memory_budget: self.grid.memory_budget,
        };

        let ent = self.entanglement;
        if ent.fine_n < 8 || !ent.fine_n.is_power_of_two() {
            return Err(bad(
                "entanglement.fine_n",
                format!("must be a power of two >= 8, got {}", ent.fine_n),
            ));
        }
        if ent.sum_nodes == 0 || ent.diff_nodes < 2 || !(ent.sum_extent > 0.0) {
            return Err(bad(
                "entanglement",
                "quadrature needs sum_nodes >= 1, diff_nodes >= 2 and sum_extent > 0".into(),
            ));
        }
        if let Some(b) = ent.down_bin {
            if b.factor == 0 || !ent.fine_n.is_multiple_of(b.factor) || ent.fine_n / b.factor < 2 {
                return Err(bad(
                    "entanglement.down_bin.factor",
                    format!("{} does not divide {}", b.factor, ent.fine_n),
                ));
            }
        }

        let c = self.coincidence;
        let detector = DetectorModel {
            pitch: c.detector.pitch.si(),
            quantum_efficiency: c.detector.quantum_efficiency,
            dark_rate: c.detector.dark_rate,
            roi: (c.detector.roi[0], c.detector.roi[1]),
        };
        detector
            .validate()
            .map_err(|e| bad("coincidence.detector", e.to_string()))?;
        if !(c.mu_pairs >= 0.0 && c.mu_pairs.is_finite()) {
            return Err(bad(
                "coincidence.mu_pairs",
                format!("must be non-negative, got {}", c.mu_pairs),
            ));
        }
        if c.n_frames < 2 {
            return Err(bad(
                "coincidence.n_frames",
                "at least two frames are needed".into(),
            ));
        }

        if !(self.paraxial.max_ratio > 0.0) {
            return Err(bad("paraxial.max_ratio", "must be positive".into()));
        }
        let guard = ParaxialGuard {
            max_ratio: self.paraxial.max_ratio,
            action: self.paraxial.action,
        };
        SpdcSource::with_guard(&model, pump, setup, guard)?;

        if self.output.formats.is_empty() {
            return Err(bad("output.formats", "at least one format is needed".into()));
        }
        let out_dir = self
            .output
            .dir
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        let mut formats = self.output.formats.clone();
        formats.sort();
        formats.dedup();

        let physics = Physics {
            model: &model,
            pump,
            lambda_s,
            setup,
            z,
            n,
            extent,
            amplitude,
            entanglement: ent,
            detector,
            mu_pairs: c.mu_pairs,
            n_frames: c.n_frames,
            seed: c.seed,
            guard,
        };
        let fingerprint = fingerprint(&physics)?;
        Ok(Resolved {
            model,
            pump,
            lambda_s,
            setup,
            z,
            n,
            extent,
            amplitude,
            entanglement: ent,
            detector,
            mu_pairs: c.mu_pairs,
            n_frames: c.n_frames,
            seed: c.seed,
            guard,
            out_dir,
            formats,
            fingerprint,
        })
    }
}

#[derive(Serialize)]
struct Physics<'a> {
    model: &'a SellmeierModel,
    pump: PumpSpec,
    lambda_s: f64,
    setup: CrystalSetup,
    z: f64,
    n: usize,
    extent: ExtentPolicy,
    amplitude: AmplitudeOptions,
    entanglement: EntanglementConfig,
    detector: DetectorModel,
    mu_pairs: f64,
    n_frames: usize,
    seed: u64,
    guard: ParaxialGuard,
}

fn fingerprint(physics: &Physics) -> Result<String> {
    let canonical = serde_json::to_vec(physics).map_err(biphoton::Error::from)?;
    let digest = Sha256::digest(&canonical);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

/// A validated configuration in SI units.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub model: SellmeierModel,
    pub pump: PumpSpec,
    pub lambda_s: f64,
    pub setup: CrystalSetup,
    pub z: f64,
    pub n: usize,
    pub extent: ExtentPolicy,
    pub amplitude: AmplitudeOptions,
    pub entanglement: EntanglementConfig,
    pub detector: DetectorModel,
    pub mu_pairs: f64,
    pub n_frames: usize,
    pub seed: u64,
    pub guard: ParaxialGuard,
    pub out_dir: PathBuf,
    pub formats: Vec<Format>,
    /// SHA-256 of the canonical JSON of every physical setting.
    pub fingerprint: String,
}

impl Resolved {
    pub fn source(&self) -> Result<SpdcSource> {
        Ok(SpdcSource::with_guard(
            &self.model,
            self.pump,
            self.setup,
            self.guard,
        )?)
    }

    pub fn scenario(&self) -> Scenario {
        Scenario {
            model: self.model.clone(),
            pump: self.pump,
            setup: self.setup,
            z: self.z,
            guard: self.guard,
        }
    }

    pub fn grid(&self, source: &SpdcSource) -> Result<MomentumGrid4> {
        Ok(MomentumGrid4::auto(self.n, source, &self.extent)?)
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(r: Result<impl std::fmt::Debug>) -> String {
        r.unwrap_err().to_string()
    }

    #[test]
    fn empty_config_gives_defaults() {
        let r = RunConfig::from_json("{}").unwrap().resolve().unwrap();
        assert_eq!(r.pump.lambda_p, 355e-9);
        assert_eq!(r.lambda_s, 710e-9);
        assert_eq!(r.pump.waist, 507e-6);
        assert_eq!(r.setup, CrystalSetup::single(5e-3, 32.9f64.to_radians()));
        assert_eq!(r.z, 5e-3);
        assert_eq!(r.n, 64);
        assert_eq!(r.mu_pairs, 5.0);
        assert_eq!(r.fingerprint.len(), 64);
    }

    #[test]
    fn units_in_file() {
        let text = r#"{"pump": {"waist": "0.5 mm"}, "crystal": {"theta_p": "32.96deg"}, "z": "7.5mm"}"#;
        let r = RunConfig::from_json(text).unwrap().resolve().unwrap();
        assert!((r.pump.waist - 5e-4).abs() < 1e-18);
        assert!((r.setup.theta_p - 32.96f64.to_radians()).abs() < 1e-15);
        assert_eq!(r.z, 7.5e-3);
    }

    #[test]
    fn flags_override_file() {
        let mut c = RunConfig::from_json(r#"{"crystal": {"theta_p": "32.9deg"}}"#).unwrap();
        c.apply(&Overrides {
            theta_p: Some("32.96deg".parse().unwrap()),
            ..Default::default()
        })
        .unwrap();
        let r = c.resolve().unwrap();
        assert!((r.setup.theta_p - 32.96f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn gap_requires_double() {
        let mut c = RunConfig::default();
        let o = Overrides {
            gap: Some(Length(2e-3)),
            ..Default::default()
        };
        assert!(err(c.apply(&o)).contains("--double"));
        let o = Overrides { double: true, ..o };
        c.apply(&o).unwrap();
        let r = c.resolve().unwrap();
        assert_eq!(r.setup, CrystalSetup::double(1e-3, 2e-3, 32.93f64.to_radians()));
        assert_eq!(r.z, 7.5e-3);
        assert_eq!(r.extent.c2, 0.7);

        let single_gap = RunConfig::from_json(r#"{"crystal": {"gap": "2mm"}}"#).unwrap();
        assert!(err(single_gap.resolve()).contains("crystal.gap"));
        let missing = RunConfig::from_json(r#"{"crystal": {"kind": "double"}}"#).unwrap();
        assert!(err(missing.resolve()).contains("required"));
    }

    #[test]
    fn errors_carry_key_paths() {
        let e = err(RunConfig::from_json(r#"{"crystal": {"lenght": "5mm"}}"#));
        assert!(e.contains("crystal") && e.contains("lenght"), "{e}");
        let e = err(RunConfig::from_json(r#"{"pump": {"waist": "5deg"}}"#));
        assert!(e.contains("pump.waist") && e.contains("expected a length"), "{e}");
        let e = err(RunConfig::from_json(r#"{"grid": {"n": 48}}"#).unwrap().resolve());
        assert!(e.contains("grid.n"), "{e}");
        let e = err(
            RunConfig::from_json(r#"{"pump": {"signal_wavelength": "800nm"}}"#)
                .unwrap()
                .resolve(),
        );
        assert!(e.contains("pump.signal_wavelength"), "{e}");
        let e = err(RunConfig::from_json(r#"{"crystal": {"theta_p": "95deg"}}"#)
            .unwrap()
            .resolve());
        assert!(e.contains("crystal.theta_p"), "{e}");
        let e = err(
            RunConfig::from_json(r#"{"coincidence": {"detector": {"quantum_efficiency": 2}}}"#)
                .unwrap()
                .resolve(),
        );
        assert!(e.contains("coincidence.detector"), "{e}");
    }

    #[test]
    fn fingerprint_tracks_physics_only() {
        let a = RunConfig::default().resolve().unwrap();
        let mut c = RunConfig::default();
        c.output.dir = Some("elsewhere".into());
        assert_eq!(c.resolve().unwrap().fingerprint, a.fingerprint);
        c.coincidence.seed = 2;
        assert_ne!(c.resolve().unwrap().fingerprint, a.fingerprint);
        let explicit = RunConfig::from_json(r#"{"z": "5mm", "crystal": {"length": "5mm"}}"#).unwrap();
        assert_eq!(explicit.resolve().unwrap().fingerprint, a.fingerprint);
    }
}
