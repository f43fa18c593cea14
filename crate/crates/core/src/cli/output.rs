//! Bit-stable CSV, JSON and gnuplot emission.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::bgp::BgpProfile;
use crate::hjb::ValueField;
use crate::kinetic::{DensityField, StrategyField};

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// At most `max` evenly strided indices out of `0..n`, first and last included.
pub fn thin_indices(n: usize, max: usize) -> Vec<usize> {
    if n <= max {
        return (0..n).collect();
    }
    let span = n - 1;
    let slots = max - 1;
    let mut out: Vec<usize> = (0..=slots).map(|j| (2 * j * span + slots) / (2 * slots)).collect();
    out.dedup();
    out
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_density_csv(path: &Path, times: &[f64], densities: &[DensityField], indices: &[usize]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "t,z,f")?;
    for &k in indices {
        let f = &densities[k];
        for (z, v) in f.mesh().nodes().iter().zip(f.values()) {
            writeln!(w, "{},{},{}", fmt_f(times[k]), fmt_f(*z), fmt_f(*v))?;
        }
    }
    w.flush()
}

pub fn write_values_csv(
    path: &Path,
    times: &[f64],
    values: &[ValueField],
    strategies: &[StrategyField],
    indices: &[usize],
) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "t,z,V,s")?;
    for &k in indices {
        let v = &values[k];
        for ((z, v), s) in v.mesh().nodes().iter().zip(v.values()).zip(strategies[k].values()) {
            writeln!(w, "{},{},{},{}", fmt_f(times[k]), fmt_f(*z), fmt_f(*v), fmt_f(*s))?;
        }
    }
    w.flush()
}

pub fn write_production_csv(path: &Path, times: &[f64], y: &[f64]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "t,Y")?;
    for (t, y) in times.iter().zip(y) {
        writeln!(w, "{},{}", fmt_f(*t), fmt_f(*y))?;
    }
    w.flush()
}

/// Generic numeric table with a fixed header.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|x| fmt_f(*x)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    w.flush()
}

/// `x,Phi,phi,v,sigma`; `v` is `nan` where no value function was built.
pub fn write_bgp_csv(path: &Path, profile: &BgpProfile) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "x,Phi,phi,v,sigma")?;
    for i in 0..profile.mesh.len() {
        let v = profile.value.as_ref().map_or(f64::NAN, |v| v[i]);
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_f(profile.mesh.nodes()[i]),
            fmt_f(profile.cdf[i]),
            fmt_f(profile.density[i]),
            fmt_f(v),
            fmt_f(profile.sigma[i])
        )?;
    }
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
    text.push('\n');
    std::fs::write(path, text)
}

/// Plot script for a `t,z,f` or `t,z,V,s` file; points are coloured by `t`.
pub fn gnuplot_snapshots(csv: &str, column: usize, ylabel: &str, log_x: bool) -> String {
    let mut s = String::from("set datafile separator ','\nset xlabel 'z'\n");
    if log_x {
        s.push_str("set logscale x\n");
    }
    s.push_str(&format!(
        "set ylabel '{ylabel}'\nset cblabel 't'\nplot '{csv}' every ::1 using 2:{column}:1 with points pt 7 ps 0.3 lc palette notitle\n"
    ));
    s
}

pub fn gnuplot_series(csv: &str, ylabel: &str, log_y: bool) -> String {
    let mut s = String::from("set datafile separator ','\nset xlabel 't'\n");
    if log_y {
        s.push_str("set logscale y\n");
    }
    s.push_str(&format!("set ylabel '{ylabel}'\nplot '{csv}' every ::1 using 1:2 with lines title '{ylabel}'\n"));
    s
}

pub fn gnuplot_bgp(csv: &str) -> String {
    format!(
        "set datafile separator ','\nset logscale x\nset xlabel 'x'\n\
         plot '{csv}' every ::1 using 1:2 with lines title 'Phi', \
         '' every ::1 using 1:5 with lines title 'sigma'\n"
    )
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    std::fs::write(path, text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning() {
        assert_eq!(thin_indices(5, 50), vec![0, 1, 2, 3, 4]);
        let idx = thin_indices(401, 50);
        assert_eq!(idx.len(), 50);
        assert_eq!(idx[0], 0);
        assert_eq!(*idx.last().unwrap(), 400);
        assert!(idx.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(thin_indices(11, 3), vec![0, 5, 10]);
    }

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 0.0] {
            assert_eq!(fmt_f(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f(1.0), "1.0000000000000000e0");
    }
}
