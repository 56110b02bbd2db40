use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{Format, Overrides};
use crate::units::{Angle, Length};

/// Simulate spatially entangled photon pairs from type-I down-conversion.
///
/// Lengths take a unit (nm, um, µm, mm, m) and angles take deg or rad.
/// Command-line values replace those from `--config`. Output goes to
/// `--out`, else `output.dir` of the config, else $BIPHOTON_OUT, else the
/// working directory.
#[derive(Debug, Parser)]
#[command(name = "biphoton", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Pump wavelength.
    #[arg(long, global = true)]
    pub lambda_p: Option<Length>,

    /// Signal (and idler) wavelength; must equal twice the pump wavelength.
    #[arg(long, global = true)]
    pub lambda_s: Option<Length>,

    /// Pump beam waist w0.
    #[arg(long, global = true)]
    pub waist: Option<Length>,

    /// Phase-matching angle.
    #[arg(long, global = true)]
    pub theta_p: Option<Angle>,

    /// Crystal length (each crystal for --double).
    #[arg(long, global = true)]
    pub length: Option<Length>,

    /// Use two crystals separated by --d.
    #[arg(long, global = true)]
    pub double: bool,

    /// Gap between the two crystals.
    #[arg(long, global = true)]
    pub d: Option<Length>,

    /// Distance from the crystal to the detection plane.
    #[arg(long, global = true)]
    pub z: Option<Length>,

    /// Points per transverse axis of the 4D grid (power of two).
    #[arg(long, global = true)]
    pub n: Option<usize>,

    /// Bins per party of the entanglement joints (power of two).
    #[arg(long, global = true)]
    pub m: Option<usize>,

    /// Mean photon pairs per frame.
    #[arg(long, global = true)]
    pub mu_pairs: Option<f64>,

    /// Number of synthetic frames.
    #[arg(long, global = true)]
    pub frames: Option<usize>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Output formats for arrays.
    #[arg(long, global = true, value_enum, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,

    /// Sellmeier coefficient file replacing the embedded BBO set.
    #[arg(long, global = true)]
    pub sellmeier: Option<PathBuf>,
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            lambda_p: self.lambda_p,
            lambda_s: self.lambda_s,
            waist: self.waist,
            theta_p: self.theta_p,
            length: self.length,
            double: self.double,
            gap: self.d,
            z: self.z,
            n: self.n,
            m: self.m,
            mu_pairs: self.mu_pairs,
            frames: self.frames,
            seed: self.seed,
            out: self.out.clone(),
            formats: self.format.clone(),
            sellmeier: self.sellmeier.clone(),
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Print the collinear phase-matching angle.
    CollinearAngle,

    /// Phase mismatch and |Phi| over a 2D momentum slice.
    PhasematchMap {
        #[arg(long, value_enum, default_value_t = Slice::Signal)]
        slice: Slice,
    },

    /// Joint distributions in position (at z) or momentum.
    Simulate {
        #[arg(value_enum)]
        basis: SimBasis,

        /// Also write the complex 4D amplitude.
        #[arg(long)]
        amplitude: bool,
    },

    /// Signal position distribution given the idler position.
    Conditional {
        #[arg(long, default_value = "0um")]
        idler_x: Length,

        #[arg(long, default_value = "0um")]
        idler_y: Length,
    },

    /// Single-photon position distribution.
    Singles,

    /// Entropic lower bound on the entanglement of formation.
    Ef,

    /// The bound over a range of z, theta_p or gap d. `scan d` uses the
    /// double-crystal configuration.
    Scan {
        #[arg(value_enum)]
        parameter: ScanArg,

        /// Comma-separated values with units; defaults depend on the parameter.
        #[arg(long)]
        values: Option<String>,
    },

    /// Synthetic camera frames and their coincidence analysis.
    Frames {
        #[command(subcommand)]
        action: FramesCommand,
    },
}

#[derive(Debug, Clone, Subcommand)]
pub enum FramesCommand {
    /// Sample a frame stack from the position distribution.
    Synth {
        /// Frame file (default `<out>/frames.frm`).
        #[arg(long)]
        output: Option<PathBuf>,
    },

    /// Accidental-subtracted coincidence map of a frame stack.
    Coincide {
        #[arg(long)]
        input: PathBuf,

        #[arg(long, value_enum, default_value_t = ReductionArg::Columns)]
        reduction: ReductionArg,

        /// Reference pixel `column,row` for `--reduction pixel`.
        #[arg(long)]
        pixel: Option<String>,

        /// Compare against the expected column map of the current config.
        #[arg(long)]
        compare: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Slice {
    /// `(q_sx, q_sy)` with `q_i = -q_s`.
    Signal,
    /// `(q_sx, q_ix)` with `q_sy = q_iy = 0`.
    XPair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SimBasis {
    Pos,
    Mom,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanArg {
    Z,
    Theta,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReductionArg {
    Columns,
    Pixel,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn global_flags_after_subcommand() {
        let cli = Cli::try_parse_from(["biphoton", "scan", "theta", "--z", "5mm", "--theta-p", "32.96deg"])
            .unwrap();
        assert_eq!(cli.global.z, Some(Length(5e-3)));
        assert!(matches!(
            cli.command,
            Command::Scan {
                parameter: ScanArg::Theta,
                ..
            }
        ));
        assert!(Cli::try_parse_from(["biphoton", "ef", "--z", "5"]).is_err());
        let cli = Cli::try_parse_from(["biphoton", "--format", "csv,pgm", "singles"]).unwrap();
        assert_eq!(cli.global.format, Some(vec![Format::Csv, Format::Pgm]));
    }
}
