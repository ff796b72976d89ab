//! Static SVG figures from a simulation CSV.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};

/// Columns of a simulation CSV needed for plotting.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlotData {
    pub t: Vec<f64>,
    pub param_err: Vec<f64>,
    /// One series per state component: `x̂ᵢ − xᵢ`.
    pub state_err: Vec<Vec<f64>>,
    pub delta: Vec<f64>,
}

fn column(headers: &csv::StringRecord, name: &str) -> Result<usize> {
    headers.iter().position(|h| h == name).ok_or_else(|| Error::Parse {
        line: 1,
        reason: format!("missing column `{name}`"),
    })
}

pub fn read_plot_data(path: &Path) -> Result<PlotData> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_plot_data(file)
}

pub fn parse_plot_data<R: std::io::Read>(input: R) -> Result<PlotData> {
    let mut rdr = csv::Reader::from_reader(input);
    let csv_err = |e: csv::Error| Error::Parse {
        line: e.position().map_or(0, |p| p.line()),
        reason: e.to_string(),
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let t_col = column(&headers, "t")?;
    let p_col = column(&headers, "param_err_norm")?;
    let d_col = column(&headers, "Delta")?;
    let n = headers.iter().filter(|h| h.starts_with("x_")).count();
    let x_cols: Vec<(usize, usize)> = (1..=n)
        .map(|i| Ok((column(&headers, &format!("x_{i}"))?, column(&headers, &format!("xhat_{i}"))?)))
        .collect::<Result<_>>()?;

    let mut data = PlotData {
        state_err: vec![Vec::new(); n],
        ..Default::default()
    };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |c: usize| -> Result<f64> {
            let field = rec.get(c).unwrap_or("");
            field.trim().parse::<f64>().map_err(|_| Error::Parse {
                line,
                reason: format!("column `{}`: `{field}` is not a number", &headers[c]),
            })
        };
        data.t.push(get(t_col)?);
        data.param_err.push(get(p_col)?);
        data.delta.push(get(d_col)?);
        for (i, &(x, xh)) in x_cols.iter().enumerate() {
            data.state_err[i].push(get(xh)? - get(x)?);
        }
    }
    if data.t.is_empty() {
        return Err(Error::InsufficientData("no data rows".into()));
    }
    Ok(data)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlotSummary {
    pub files: Vec<PathBuf>,
    /// Samples left out of the log-scale figure because they are exactly 0.
    pub omitted_zeros: usize,
}

fn draw_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Config(format!("plot rendering failed: {e}"))
}

fn range(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5 - lo.abs() * 0.1, hi + 0.5 + hi.abs() * 0.1)
    }
}

const SIZE: (u32, u32) = (900, 540);
const COLORS: [RGBColor; 6] = [BLUE, RED, GREEN, MAGENTA, CYAN, BLACK];

fn t_range(data: &PlotData) -> (f64, f64) {
    let t_end = data.t.last().copied().unwrap_or(0.0);
    let t0 = data.t[0];
    if t_end > t0 {
        (t0, t_end)
    } else {
        (t0, t0 + 1.0)
    }
}

fn plot_param_err(data: &PlotData, path: &Path) -> Result<usize> {
    let pts: Vec<(f64, f64)> = data
        .t
        .iter()
        .zip(&data.param_err)
        .filter(|(_, v)| **v > 0.0)
        .map(|(&t, &v)| (t, v))
        .collect();
    let omitted = data.param_err.len() - pts.len();
    let (lo, hi) = if pts.is_empty() {
        (1e-16, 1.0)
    } else {
        let (lo, hi) = range(pts.iter().map(|p| p.1));
        (lo.max(f64::MIN_POSITIVE) / 2.0, hi * 2.0)
    };
    let (t0, t1) = t_range(data);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Parameter estimation error", ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(45)
        .y_label_area_size(80)
        .build_cartesian_2d(t0..t1, (lo..hi).log_scale())
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc("|theta_hat - theta|")
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(draw_err)?;
    chart.draw_series(LineSeries::new(pts, &BLUE)).map_err(draw_err)?;
    if omitted > 0 {
        root.draw_text(
            &format!("{omitted} exact-zero samples omitted from the log scale"),
            &("sans-serif", 14).into_font().color(&BLACK),
            (90, SIZE.1 as i32 - 18),
        )
        .map_err(draw_err)?;
    }
    root.present().map_err(draw_err)?;
    Ok(omitted)
}

fn plot_linear(path: &Path, title: &str, y_desc: &str, t: &[f64], series: &[(String, &[f64])]) -> Result<()> {
    let (y0, y1) = range(series.iter().flat_map(|(_, s)| s.iter().copied()));
    let pad = 0.05 * (y1 - y0);
    let t0 = t[0];
    let t1 = if *t.last().unwrap() > t0 { *t.last().unwrap() } else { t0 + 1.0 };
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(45)
        .y_label_area_size(80)
        .build_cartesian_2d(t0..t1, (y0 - pad)..(y1 + pad))
        .map_err(draw_err)?;
    chart
        .configure_mesh()
        .x_desc("t [s]")
        .y_desc(y_desc)
        .draw()
        .map_err(draw_err)?;
    for (i, (label, s)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        chart
            .draw_series(LineSeries::new(t.iter().copied().zip(s.iter().copied()), &color))
            .map_err(draw_err)?
            .label(label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err)?;
    root.present().map_err(draw_err)?;
    Ok(())
}

/// Writes one SVG per plotted signal into `out_dir`.
pub fn plot_csv(csv_path: &Path, out_dir: &Path) -> Result<PlotSummary> {
    let data = read_plot_data(csv_path)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let files = vec![
        out_dir.join("param_error.svg"),
        out_dir.join("state_error.svg"),
        out_dir.join("delta.svg"),
    ];
    let omitted_zeros = plot_param_err(&data, &files[0])?;
    let comps: Vec<(String, &[f64])> = data
        .state_err
        .iter()
        .enumerate()
        .map(|(i, s)| (format!("xhat_{0} - x_{0}", i + 1), s.as_slice()))
        .collect();
    plot_linear(&files[1], "State observation error", "xhat - x", &data.t, &comps)?;
    plot_linear(
        &files[2],
        "Mixing determinant",
        "Delta",
        &data.t,
        &[("Delta".to_string(), data.delta.as_slice())],
    )?;
    Ok(PlotSummary { files, omitted_zeros })
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "t,u,y,x_1,x_2,xhat_1,xhat_2,thetahat_1,param_err_norm,state_err_norm,Delta\n";

    #[test]
    fn header_only_is_no_data() {
        match parse_plot_data(HEADER.as_bytes()) {
            Err(Error::InsufficientData(m)) => assert_eq!(m, "no data rows"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let text = format!("{HEADER}0,0,0,0,0,0,0,0,1,0,0\n1,0,0,0,0,0,0,0,oops,0,0\n");
        match parse_plot_data(text.as_bytes()) {
            Err(Error::Parse { line, reason }) => {
                assert_eq!(line, 3);
                assert!(reason.contains("param_err_norm"), "{reason}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ragged_row_reports_line() {
        let text = format!("{HEADER}0,0,0,0,0,0,0,0,1,0,0\n1,2\n");
        assert!(matches!(parse_plot_data(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
    }

    #[test]
    fn state_error_is_difference() {
        let text = format!("{HEADER}0,0,0,1,2,1.5,1,0,1,0,0\n");
        let d = parse_plot_data(text.as_bytes()).unwrap();
        assert_eq!(d.state_err, vec![vec![0.5], vec![-1.0]]);
    }
}
