use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use plotters::prelude::*;

use crate::protocols::ProtocolKind;
use crate::Error;

use super::{write_csv, ResultRow};

/// Completion statistics of one (protocol, k, erasure) group. The moments
/// cover completed replicates only; timeouts are counted separately.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub protocol: ProtocolKind,
    pub k: usize,
    pub erasure: f64,
    pub replicates: usize,
    pub timeouts: usize,
    /// `None` when every replicate timed out.
    pub mean: Option<f64>,
    /// Sample standard deviation; 0 for a single completed replicate.
    pub sd: Option<f64>,
    pub min: Option<u64>,
    pub max: Option<u64>,
    pub mean_row_ops: f64,
}

/// Coop's mean completion relative to a baseline at one sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct Reduction {
    pub k: usize,
    pub erasure: f64,
    pub baseline: ProtocolKind,
    pub coop_mean: f64,
    pub baseline_mean: f64,
    /// `100 · (baseline − coop) / baseline`.
    pub percent: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    pub rows: Vec<SummaryRow>,
    /// Coop against the fastest baseline that never timed out at each point;
    /// means over partial completions are biased towards lucky seeds.
    pub best: Vec<Reduction>,
    /// Coop against every available baseline at each point.
    pub each: Vec<Reduction>,
    pub seconds_per_slot: Option<f64>,
}

impl Summary {
    pub fn get(&self, protocol: ProtocolKind, k: usize, erasure: f64) -> Option<&SummaryRow> {
        self.rows
            .iter()
            .find(|r| r.protocol == protocol && r.k == k && r.erasure == erasure)
    }

    pub fn reduction(&self, baseline: ProtocolKind, k: usize, erasure: f64) -> Option<&Reduction> {
        self.each
            .iter()
            .find(|r| r.baseline == baseline && r.k == k && r.erasure == erasure)
    }
}

pub fn summarize(rows: &[ResultRow]) -> Summary {
    let mut groups: Vec<(ProtocolKind, usize, f64, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        match groups
            .iter_mut()
            .find(|g| g.0 == r.protocol && g.1 == r.k && g.2 == r.erasure)
        {
            Some(g) => g.3.push(r),
            None => groups.push((r.protocol, r.k, r.erasure, vec![r])),
        }
    }
    let mut out = Summary::default();
    for (protocol, k, erasure, members) in groups {
        let done: Vec<f64> = members
            .iter()
            .filter_map(|r| r.completion_slots)
            .map(|c| c as f64)
            .collect();
        let n = done.len();
        let mean = (n > 0).then(|| done.iter().sum::<f64>() / n as f64);
        let sd = mean.map(|m| {
            if n < 2 {
                0.0
            } else {
                (done.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            }
        });
        let completed = members.iter().filter_map(|r| r.completion_slots);
        out.rows.push(SummaryRow {
            protocol,
            k,
            erasure,
            replicates: members.len(),
            timeouts: members.len() - n,
            mean,
            sd,
            min: completed.clone().min(),
            max: completed.max(),
            mean_row_ops: members
                .iter()
                .map(|r| r.decoder_row_ops as f64)
                .sum::<f64>()
                / members.len() as f64,
        });
    }
    let points: Vec<(usize, f64)> = out
        .rows
        .iter()
        .filter(|r| r.protocol == ProtocolKind::Coop)
        .map(|r| (r.k, r.erasure))
        .collect();
    for (k, erasure) in points {
        let Some(coop) = out.get(ProtocolKind::Coop, k, erasure).and_then(|r| r.mean) else {
            continue;
        };
        let mut best: Option<Reduction> = None;
        for b in out.rows.iter().filter(|r| r.k == k && r.erasure == erasure) {
            let Some(bm) = b.mean.filter(|_| b.protocol != ProtocolKind::Coop) else {
                continue;
            };
            let red = Reduction {
                k,
                erasure,
                baseline: b.protocol,
                coop_mean: coop,
                baseline_mean: bm,
                percent: 100.0 * (bm - coop) / bm,
            };
            let eligible = b.timeouts == 0;
            if eligible && best.as_ref().is_none_or(|x| bm < x.baseline_mean) {
                best = Some(red.clone());
            }
            out.each.push(red);
        }
        out.best.extend(best);
    }
    out
}

fn opt<T: fmt::Display>(x: Option<T>, digits: usize) -> String {
    match x {
        Some(v) => format!("{v:.digits$}"),
        None => "unavailable".into(),
    }
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<16} {:>4} {:>7} {:>5} {:>8} {:>11} {:>9} {:>6} {:>6} {:>12}",
            "protocol", "k", "erasure", "runs", "timeouts", "mean", "sd", "min", "max", "row_ops"
        )?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<16} {:>4} {:>7} {:>5} {:>8} {:>11} {:>9} {:>6} {:>6} {:>12.1}",
                r.protocol.name(),
                r.k,
                r.erasure,
                r.replicates,
                r.timeouts,
                opt(r.mean, 2),
                opt(r.sd, 2),
                opt(r.min, 0),
                opt(r.max, 0),
                r.mean_row_ops
            )?;
        }
        if let Some(s) = self.seconds_per_slot {
            writeln!(f, "\n(1 slot = {s} s)")?;
        }
        if !self.each.is_empty() {
            writeln!(f, "\ncoop completion-time reduction")?;
            for r in &self.each {
                let star = if self.best.contains(r) {
                    " (best baseline)"
                } else {
                    ""
                };
                writeln!(
                    f,
                    "  k={:<3} erasure={:<5} vs {:<16} {:+7.1}%  ({:.1} vs {:.1} slots){}",
                    r.k,
                    r.erasure,
                    r.baseline.name(),
                    r.percent,
                    r.coop_mean,
                    r.baseline_mean,
                    star
                )?;
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Plot,
    Both,
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "plot" => Ok(OutputFormat::Plot),
            "both" => Ok(OutputFormat::Both),
            other => Err(format!("unknown format `{other}` (csv, plot, both)")),
        }
    }
}

fn io_at(path: &Path, e: impl fmt::Display) -> Error {
    std::io::Error::other(format!("{}: {e}", path.display())).into()
}

/// Mean completion time against k, one series per protocol, at one erasure
/// rate. Groups without completed replicates are left out of their series.
pub fn plot_svg(summary: &Summary, erasure: f64, title: &str) -> Result<String, Error> {
    let rows: Vec<&SummaryRow> = summary
        .rows
        .iter()
        .filter(|r| r.erasure == erasure)
        .collect();
    let mut protocols: Vec<ProtocolKind> = Vec::new();
    for r in &rows {
        if !protocols.contains(&r.protocol) {
            protocols.push(r.protocol);
        }
    }
    let k_max = rows.iter().map(|r| r.k).max().unwrap_or(1) as f64;
    let y_max = rows.iter().filter_map(|r| r.mean).fold(1.0, f64::max) * 1.1;
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (800, 520)).into_drawing_area();
        let err = |e: &dyn fmt::Display| Error::from(std::io::Error::other(e.to_string()));
        root.fill(&WHITE).map_err(|e| err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(title, ("sans-serif", 20))
            .margin(16)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(0.0..k_max * 1.05, 0.0..y_max)
            .map_err(|e| err(&e))?;
        chart
            .configure_mesh()
            .x_desc("k (packets per page)")
            .y_desc("mean completion time (slots)")
            .draw()
            .map_err(|e| err(&e))?;
        for (i, p) in protocols.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            let mut pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.protocol == *p)
                .filter_map(|r| r.mean.map(|m| (r.k as f64, m)))
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            chart
                .draw_series(LineSeries::new(pts.clone(), color.stroke_width(2)))
                .map_err(|e| err(&e))?
                .label(p.name())
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                });
            chart
                .draw_series(pts.into_iter().map(|xy| Circle::new(xy, 3, color.filled())))
                .map_err(|e| err(&e))?;
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::UpperLeft)
            .draw()
            .map_err(|e| err(&e))?;
        root.present().map_err(|e| err(&e))?;
    }
    Ok(svg)
}

/// Writes `<name>.csv`, `<name>.summary.txt` and one
/// `<name>-e<erasure>.svg` per erasure rate, depending on `format`.
pub fn emit(
    name: &str,
    rows: &[ResultRow],
    summary: &Summary,
    format: OutputFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, Error> {
    std::fs::create_dir_all(out_dir).map_err(|e| io_at(out_dir, e))?;
    let mut written = Vec::new();
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        let path = out_dir.join(format!("{name}.csv"));
        let file = std::fs::File::create(&path).map_err(|e| io_at(&path, e))?;
        write_csv(rows, std::io::BufWriter::new(file)).map_err(|e| io_at(&path, e))?;
        written.push(path);
        let path = out_dir.join(format!("{name}.summary.txt"));
        std::fs::write(&path, summary.to_string()).map_err(|e| io_at(&path, e))?;
        written.push(path);
    }
    if matches!(format, OutputFormat::Plot | OutputFormat::Both) {
        let mut erasures: Vec<f64> = summary.rows.iter().map(|r| r.erasure).collect();
        erasures.sort_by(f64::total_cmp);
        erasures.dedup();
        for e in erasures {
            let svg = plot_svg(summary, e, &format!("{name}: erasure {e}"))?;
            let path = out_dir.join(format!("{name}-e{e}.svg"));
            std::fs::write(&path, svg).map_err(|err| io_at(&path, err))?;
            written.push(path);
        }
    }
    Ok(written)
}
