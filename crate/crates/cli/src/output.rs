//! File writers: GRD1 grids, CSV tables, PGM previews. Every file is
//! written to a temporary sibling and renamed into place.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use biphoton::fields::{BiphotonAmplitude4, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const GRID_MAGIC: &str = "GRD1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridAxis {
    pub name: String,
    pub len: usize,
    pub bin_width: f64,
    pub unit: String,
    /// Coordinate of index 0.
    pub origin: f64,
}

impl GridAxis {
    /// Axis whose index `len / 2` sits at zero.
    pub fn centered(name: &str, len: usize, bin_width: f64, unit: &str) -> Self {
        Self {
            name: name.into(),
            len,
            bin_width,
            unit: unit.into(),
            origin: -((len / 2) as f64) * bin_width,
        }
    }

    /// Plain index axis starting at zero.
    pub fn index(name: &str, len: usize, unit: &str) -> Self {
        Self {
            name: name.into(),
            len,
            bin_width: 1.0,
            unit: unit.into(),
            origin: 0.0,
        }
    }

    pub fn coordinate(&self, idx: usize) -> f64 {
        self.origin + idx as f64 * self.bin_width
    }
}

/// A row-major array of `f64` with axis metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<GridAxis>,
    pub values: Vec<f64>,
    pub fingerprint: String,
    /// Free-form metadata stored in the GRD1 header.
    pub meta: Option<serde_json::Value>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridHeader {
    magic: String,
    shape: Vec<usize>,
    axes: Vec<String>,
    bin_widths: Vec<f64>,
    units: Vec<String>,
    origins: Vec<f64>,
    dtype: String,
    fingerprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<serde_json::Value>,
}

impl Grid {
    pub fn new(axes: Vec<GridAxis>, values: Vec<f64>, fingerprint: &str) -> Result<Self> {
        let len: usize = axes.iter().map(|a| a.len).product();
        if len != values.len() {
            return Err(CliError::Output(format!(
                "grid has {} values for shape {:?}",
                values.len(),
                axes.iter().map(|a| a.len).collect::<Vec<_>>()
            )));
        }
        Ok(Self {
            axes,
            values,
            fingerprint: fingerprint.into(),
            meta: None,
        })
    }

    pub fn from_distribution(dist: &Distribution, fingerprint: &str) -> Result<Self> {
        let axes = dist
            .axes()
            .iter()
            .map(|a| GridAxis::centered(&a.name, a.len, a.bin_width, &a.unit))
            .collect();
        Self::new(axes, dist.values().to_vec(), fingerprint)
    }

    /// The complex amplitude with a trailing `re_im` axis of length 2.
    pub fn from_amplitude(amp: &BiphotonAmplitude4, fingerprint: &str) -> Result<Self> {
        let n = amp.grid().n();
        let (names, unit) = match amp.basis() {
            biphoton::fields::Basis::Momentum => (["q_sx", "q_sy", "q_ix", "q_iy"], "rad/m"),
            biphoton::fields::Basis::Position => (["x_s", "y_s", "x_i", "y_i"], "m"),
        };
        let mut axes: Vec<GridAxis> = names
            .iter()
            .map(|name| GridAxis::centered(name, n, amp.bin_width(), unit))
            .collect();
        axes.push(GridAxis::index("re_im", 2, ""));
        let values = amp.values().iter().flat_map(|c| [c.re, c.im]).collect();
        Self::new(axes, values, fingerprint)
    }

    pub fn with_meta(mut self, meta: serde_json::Value) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    fn check_finite(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(CliError::Output(format!(
                "refusing to write non-finite value at flat index {i}"
            ))),
            None => Ok(()),
        }
    }

    fn check_2d(&self, what: &str) -> Result<()> {
        if self.axes.len() != 2 {
            return Err(CliError::Output(format!(
                "{what} output needs a 2D array, got {}D",
                self.axes.len()
            )));
        }
        Ok(())
    }

    pub fn write_grd1<W: Write>(&self, out: W) -> Result<()> {
        self.check_finite()?;
        let header = GridHeader {
            magic: GRID_MAGIC.into(),
            shape: self.shape(),
            axes: self.axes.iter().map(|a| a.name.clone()).collect(),
            bin_widths: self.axes.iter().map(|a| a.bin_width).collect(),
            units: self.axes.iter().map(|a| a.unit.clone()).collect(),
            origins: self.axes.iter().map(|a| a.origin).collect(),
            dtype: "f64le".into(),
            fingerprint: self.fingerprint.clone(),
            meta: self.meta.clone(),
        };
        let mut w = BufWriter::new(out);
        serde_json::to_writer(&mut w, &header).map_err(biphoton::Error::from)?;
        w.write_all(b"\n")?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_grd1<R: Read>(input: R) -> Result<Self> {
        let mut r = BufReader::new(input);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let h: GridHeader = serde_json::from_str(line.trim_end())
            .map_err(|e| CliError::Output(format!("bad GRD1 header: {e}")))?;
        if h.magic != GRID_MAGIC || h.dtype != "f64le" {
            return Err(CliError::Output(format!("not a GRD1 file (magic {:?})", h.magic)));
        }
        let k = h.shape.len();
        if [h.axes.len(), h.bin_widths.len(), h.units.len(), h.origins.len()] != [k; 4] {
            return Err(CliError::Output("GRD1 header lists disagree in length".into()));
        }
        let len: usize = h.shape.iter().product();
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != 8 * len {
            return Err(CliError::Output(format!(
                "GRD1 payload is {} bytes, expected {}",
                bytes.len(),
                8 * len
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let axes = (0..k)
            .map(|i| GridAxis {
                name: h.axes[i].clone(),
                len: h.shape[i],
                bin_width: h.bin_widths[i],
                unit: h.units[i].clone(),
                origin: h.origins[i],
            })
            .collect();
        Ok(Self {
            axes,
            values,
            fingerprint: h.fingerprint,
            meta: h.meta,
        })
    }

    /// Header `row\col` plus the column coordinates, then one row per first-axis index.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        self.check_2d("CSV")?;
        self.check_finite()?;
        let (rows, cols) = (&self.axes[0], &self.axes[1]);
        let mut w = BufWriter::new(out);
        writeln!(w, "# fingerprint {}", self.fingerprint)?;
        write!(w, "{}\\{}", rows.name, cols.name)?;
        for c in 0..cols.len {
            write!(w, ",{:e}", cols.coordinate(c))?;
        }
        writeln!(w)?;
        for r in 0..rows.len {
            write!(w, "{:e}", rows.coordinate(r))?;
            for v in &self.values[r * cols.len..(r + 1) * cols.len] {
                write!(w, ",{v:e}")?;
            }
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Binary 8-bit PGM scaled so the largest value maps to 255; negative
    /// values clip to 0. The first axis runs down the image.
    pub fn write_pgm<W: Write>(&self, out: W) -> Result<()> {
        self.check_2d("PGM")?;
        self.check_finite()?;
        let (rows, cols) = (self.axes[0].len, self.axes[1].len);
        let max = self.values.iter().cloned().fold(0.0, f64::max);
        let mut w = BufWriter::new(out);
        write!(w, "P5\n# fingerprint {}\n{cols} {rows}\n255\n", self.fingerprint)?;
        let bytes: Vec<u8> = self
            .values
            .iter()
            .map(|&v| {
                if max > 0.0 {
                    (255.0 * v.max(0.0) / max).round() as u8
                } else {
                    0
                }
            })
            .collect();
        w.write_all(&bytes)?;
        w.flush()?;
        Ok(())
    }
}

/// Writes through `f` into a temporary file next to `path`, then renames it.
pub fn atomic_write<F>(path: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut fs::File) -> Result<()>,
{
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Output(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut file = fs::File::create(&tmp)?;
        f(&mut file)?;
        file.sync_all()?;
        fs::rename(&tmp, path)?;
        Ok(())
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn atomic_write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    atomic_write(path, |f| Ok(f.write_all(bytes)?))
}

pub fn read_grd1_file(path: &Path) -> Result<Grid> {
    Grid::read_grd1(fs::File::open(path)?)
}

/// Writes `grid` as `<dir>/<stem>.<ext>` for each requested format that
/// suits its rank, returning the paths written.
pub fn write_grid(
    grid: &Grid,
    dir: &Path,
    stem: &str,
    formats: &[crate::config::Format],
) -> Result<Vec<PathBuf>> {
    use crate::config::Format;
    let mut written = Vec::new();
    for f in formats {
        let (ext, ok) = match f {
            Format::Grd1 => ("grd1", true),
            Format::Csv => ("csv", grid.axes.len() == 2),
            Format::Pgm => ("pgm", grid.axes.len() == 2),
        };
        if !ok {
            continue;
        }
        let path = dir.join(format!("{stem}.{ext}"));
        atomic_write(&path, |file| match f {
            Format::Grd1 => grid.write_grd1(file),
            Format::Csv => grid.write_csv(file),
            Format::Pgm => grid.write_pgm(file),
        })?;
        written.push(path);
    }
    Ok(written)
}

/// A CSV table with a fingerprint comment line and a header row.
pub fn write_table(path: &Path, fingerprint: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut text = format!("# fingerprint {fingerprint}\n{}\n", header.join(","));
    for r in rows {
        text.push_str(&r.join(","));
        text.push('\n');
    }
    atomic_write_bytes(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid3() -> Grid {
        Grid::new(
            vec![
                GridAxis::centered("x_s", 3, 1e-5, "m"),
                GridAxis::centered("x_i", 3, 1e-5, "m"),
            ],
            (0..9).map(|v| v as f64 / 36.0).collect(),
            "fp",
        )
        .unwrap()
    }

    #[test]
    fn grd1_round_trip_is_bit_exact() {
        let mut g = grid3();
        g.values[4] = f64::MIN_POSITIVE;
        g.values[5] = -0.1 + 0.2;
        let g = g.with_meta(serde_json::json!({"z": 5e-3}));
        let mut bytes = Vec::new();
        g.write_grd1(&mut bytes).unwrap();
        let back = Grid::read_grd1(bytes.as_slice()).unwrap();
        assert_eq!(back, g);
        for (a, b) in back.values.iter().zip(&g.values) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let mut again = Vec::new();
        back.write_grd1(&mut again).unwrap();
        assert_eq!(again, bytes);
        bytes.pop();
        assert!(Grid::read_grd1(bytes.as_slice()).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut out = Vec::new();
        grid3().write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[0].starts_with("# fingerprint fp"));
        assert!(lines[1].starts_with("x_s\\x_i,"));
        assert_eq!(lines[2..].len(), 3);
        assert!(lines[2..].iter().all(|l| l.split(',').count() == 4));
    }

    #[test]
    fn pgm_is_max_normalized() {
        let mut out = Vec::new();
        grid3().write_pgm(&mut out).unwrap();
        let header = b"P5\n# fingerprint fp\n3 3\n255\n";
        assert_eq!(&out[..header.len()], header);
        let px = &out[header.len()..];
        assert_eq!(px.len(), 9);
        assert_eq!(*px.iter().max().unwrap(), 255);
        assert_eq!(px[0], 0);
    }

    #[test]
    fn refuses_non_finite_and_wrong_rank() {
        let mut g = grid3();
        g.values[2] = f64::NAN;
        assert!(g.write_grd1(Vec::new()).is_err());
        assert!(g.write_csv(Vec::new()).is_err());
        let g3 = Grid::new(vec![GridAxis::index("a", 2, ""); 3], vec![0.0; 8], "fp").unwrap();
        assert!(g3.write_pgm(Vec::new()).is_err());
        assert!(Grid::new(vec![GridAxis::index("a", 2, "")], vec![0.0; 3], "fp").is_err());
    }

    #[test]
    fn atomic_write_leaves_no_temporaries() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.grd1");
        atomic_write(&path, |f| grid3().write_grd1(f)).unwrap();
        let failed = atomic_write(&dir.path().join("bad.csv"), |_| {
            Err(CliError::Output("boom".into()))
        });
        assert!(failed.is_err());
        let names: Vec<_> = fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names, vec![std::ffi::OsString::from("g.grd1")]);
        assert_eq!(read_grd1_file(&path).unwrap(), grid3());
    }
}
