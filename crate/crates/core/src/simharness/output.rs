use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use super::run::{MetricsFrame, SweepRow};

pub const METRICS_HEADER: &str = "iter,sbs_id,total_reliability,n_visible,n_360,wall_ms";
pub const CDF_HEADER: &str = "reliability,fraction";
pub const SWEEP_HEADER: &str = "axis_value,algorithm,mean_total_reliability,stderr";

/// Writes `metrics.csv` rows, one per SBS per frame.
pub struct MetricsWriter<W: Write> {
    out: W,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        writeln!(out, "{METRICS_HEADER}")?;
        Ok(Self { out })
    }

    pub fn write_frame(&mut self, frame: &MetricsFrame) -> io::Result<()> {
        for s in &frame.round.sbs {
            writeln!(
                self.out,
                "{},{},{},{},{},{}",
                frame.iter, s.sbs.0, s.total_reliability, s.n_visible, s.n_360, frame.wall_ms
            )?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> io::Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

pub fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_metrics_csv(path: &Path, frames: &[MetricsFrame]) -> io::Result<()> {
    let mut w = MetricsWriter::new(create(path)?)?;
    for f in frames {
        w.write_frame(f)?;
    }
    w.finish().map(drop)
}

pub fn write_cdf_csv(path: &Path, cdf: &[(f64, f64)]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{CDF_HEADER}")?;
    for (r, f) in cdf {
        writeln!(w, "{r},{f}")?;
    }
    w.flush()
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> io::Result<()> {
    let mut w = create(path)?;
    writeln!(w, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{}", r.axis_value, r.algorithm, r.mean_total_reliability, r.stderr)?;
    }
    w.flush()
}

/// Summed total reliability per iteration against iteration.
pub fn metrics_gnuplot(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'iteration'\n\
         set ylabel 'total reliability'\n\
         set terminal pngcairo size 900,600\n\
         set output 'metrics.png'\n\
         plot '{csv}' using 1:3 smooth frequency with lines title 'all SBSs'\n"
    )
}

pub fn cdf_gnuplot(csv: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key off\n\
         set xlabel 'reliability'\n\
         set ylabel 'CDF'\n\
         set yrange [0:1]\n\
         set terminal pngcairo size 900,600\n\
         set output 'cdf.png'\n\
         plot '{csv}' using 1:2 every ::1 with steps\n"
    )
}

/// One line with error bars per algorithm.
pub fn sweep_gnuplot(csv: &str, axis: &str, algorithms: &[String]) -> String {
    let mut s = format!(
        "set datafile separator ','\n\
         set xlabel '{axis}'\n\
         set ylabel 'total reliability'\n\
         set terminal pngcairo size 900,600\n\
         set output 'sweep.png'\n\
         plot "
    );
    let curves: Vec<String> = algorithms
        .iter()
        .map(|a| format!("'{csv}' using 1:(strcol(2) eq '{a}' ? $3 : NaN):4 every ::1 with yerrorlines title '{a}'"))
        .collect();
    s.push_str(&curves.join(", \\\n     "));
    s.push('\n');
    s
}

pub fn write_text(path: &Path, text: &str) -> io::Result<()> {
    std::fs::write(path, text)
}
