//! Stable-format result emission: CSV grids and series at 12 significant
//! digits, a single JSON document with embedded provenance, and a provenance
//! sidecar next to any CSV output. All writes are atomic (temp file, rename).

use crate::config::OutputFormat;
use crate::exec::ResultBundle;
use crate::error::Result;
use crate::lattice::Grid;
use std::path::{Path, PathBuf};

/// Render with 12 significant digits and no trailing zero noise.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    let neg = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();

    let body = if (-5..15).contains(&exp) {
        let point = exp + 1; // digits before the decimal point
        let mut int_part: String;
        let mut frac_part: String;
        if point <= 0 {
            int_part = "0".to_string();
            frac_part = format!("{}{}", "0".repeat(-point as usize), digits);
        } else if (point as usize) >= digits.len() {
            int_part = format!("{}{}", digits, "0".repeat(point as usize - digits.len()));
            frac_part = String::new();
        } else {
            int_part = digits[..point as usize].to_string();
            frac_part = digits[point as usize..].to_string();
        }
        while frac_part.ends_with('0') {
            frac_part.pop();
        }
        if int_part.is_empty() {
            int_part = "0".to_string();
        }
        if frac_part.is_empty() {
            int_part
        } else {
            format!("{int_part}.{frac_part}")
        }
    } else {
        let trimmed = digits.trim_end_matches('0');
        let trimmed = if trimmed.is_empty() { "0" } else { trimmed };
        if trimmed.len() == 1 {
            format!("{}e{}", trimmed, exp)
        } else {
            format!("{}.{}e{}", &trimmed[..1], &trimmed[1..], exp)
        }
    };
    if neg {
        format!("-{body}")
    } else {
        body
    }
}

/// Grid as CSV: one line per row, comma-separated, row-major.
pub fn grid_csv(grid: &Grid) -> String {
    let mut out = String::new();
    for r in 0..grid.rows {
        let row: Vec<String> = (0..grid.cols).map(|c| format_sig(grid.at(r, c))).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Mean-capital series as two-column CSV with a header.
pub fn series_csv(series: &[crate::exec::SeriesPoint]) -> String {
    let mut out = String::from("iteration,avg_capital\n");
    for p in series {
        out.push_str(&format!("{},{}\n", p.iteration, format_sig(p.value)));
    }
    out
}

/// Bar data as (players, game, value) CSV with a header.
pub fn bars_csv(bars: &[crate::lattice::BarRow]) -> String {
    let mut out = String::from("players,game,value\n");
    for b in bars {
        out.push_str(&format!("{},{},{}\n", b.players, b.game, format_sig(b.value)));
    }
    out
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Write the bundle into `dir` in the requested formats; returns the paths
/// written. CSV output always gets a `provenance.json` sidecar.
pub fn emit(bundle: &ResultBundle, dir: &Path, formats: &[OutputFormat]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for format in formats {
        match format {
            OutputFormat::Csv => {
                if let Some(grid) = &bundle.grid {
                    let path = dir.join("grid.csv");
                    write_atomic(&path, &grid_csv(grid))?;
                    written.push(path);
                }
                let path = dir.join("series.csv");
                write_atomic(&path, &series_csv(&bundle.series))?;
                written.push(path);
                if let Some(bars) = &bundle.bars {
                    let path = dir.join("bars.csv");
                    write_atomic(&path, &bars_csv(bars))?;
                    written.push(path);
                }
                let path = dir.join("provenance.json");
                let prov = serde_json::to_string_pretty(&bundle.provenance)
                    .expect("provenance serializes");
                write_atomic(&path, &(prov + "\n"))?;
                written.push(path);
            }
            OutputFormat::Json => {
                let path = dir.join("result.json");
                let doc = serde_json::to_string_pretty(bundle).expect("bundle serializes");
                write_atomic(&path, &(doc + "\n"))?;
                written.push(path);
            }
        }
    }
    Ok(written)
}
