//! Scenario files: TOML restricted to flat dotted keys at the top level.
//!
//! ```toml
//! dims.n = 2
//! gains.K = [7.5, 25.0]
//! A_B.entry.2.1 = { a = -1.0, b = 0.1, omega = 1.0, phase = 0.0 }
//! ```
//!
//! Time-varying matrices list their non-zero entries with 1-based
//! `entry.<row>.<col>` keys; omitted entries are zero and omitted sinusoid
//! fields default to zero.

use std::fmt::Write as _;
use std::path::Path;

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::truth::{
    Dims, Gains, InitialConditions, InputSignal, NoiseSpec, RhoReadout, Scenario, SimSettings,
    SineTerm, SinusoidEntry, TimeVaryingMatrix, VerifySettings,
};

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_scenario(&text)
}

pub fn save_scenario(sc: &Scenario, path: &Path) -> Result<()> {
    std::fs::write(path, write_scenario(sc)).map_err(|e| Error::io(path, e))
}

fn line_of(text: &str, offset: usize) -> u64 {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() as u64 + 1
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let table: Table = toml::from_str(text).map_err(|e| Error::Parse {
        line: e.span().map_or(0, |s| line_of(text, s.start)),
        reason: e.message().to_string(),
    })?;
    let doc = Doc { root: &table };

    let dims = Dims {
        n: doc.usize("dims.n")?,
        n_theta: doc.usize("dims.n_theta")?,
        n_b: doc.usize("dims.n_B")?,
        n_w: doc.usize("dims.n_w")?,
        n_gamma: doc.usize("dims.n_Gamma")?,
    };

    let rho_readout = match (doc.opt("rho.matrix"), doc.opt("dims.n_rho")) {
        (Some(_), _) => {
            let matrix = doc.matrix("rho.matrix")?;
            let offset = match doc.opt("rho.offset") {
                Some(_) => doc.vector("rho.offset")?,
                None => vec![0.0; matrix.rows()],
            };
            Some(RhoReadout { matrix, offset })
        }
        (None, Some(_)) if doc.usize("dims.n_rho")? == dims.n_gamma => Some(RhoReadout {
            matrix: DenseMatrix::identity(dims.n_gamma),
            offset: vec![0.0; dims.n_gamma],
        }),
        _ => None,
    };

    let sim_default = SimSettings::default();
    let verify_default = VerifySettings::default();
    let window = match doc.opt("verify.window") {
        Some(_) => {
            let w = doc.vector("verify.window")?;
            if w.len() != 2 {
                return Err(Error::scenario("verify.window", "expected [start, end]"));
            }
            (w[0], w[1])
        }
        None => verify_default.window,
    };

    let sc = Scenario {
        dims,
        a_theta: doc.tv_matrix("A_theta", dims.n_theta)?,
        a_b: doc.tv_matrix("A_B", dims.n_b)?,
        h_theta: doc.matrix("h_theta")?,
        h_b: doc.matrix("h_B")?,
        s: doc.matrix("S")?,
        h_delta: doc.vector("h_delta")?,
        c_gamma: doc.matrix("C_Gamma")?,
        eta: doc.vector("eta")?,
        init: InitialConditions {
            x: doc.vector("init.x")?,
            x_theta: doc.vector("init.x_theta")?,
            x_b: doc.vector("init.x_B")?,
            w: doc.vector("init.w")?,
        },
        input: InputSignal {
            constant: doc.f64_or("input.constant", 0.0)?,
            terms: doc.sine_terms("input.terms")?,
        },
        gains: Gains {
            k: doc.vector("gains.K")?,
            f: doc.vector("gains.f")?,
            f0: doc.f64("gains.f0")?,
            alpha: doc.f64("gains.alpha")?,
            gamma: doc.f64("gains.gamma")?,
        },
        noise: NoiseSpec {
            amplitude: doc.f64_or("noise.amplitude", 0.0)?,
            seed: match doc.opt("noise.seed") {
                Some(_) => doc.usize("noise.seed")? as u64,
                None => 0,
            },
        },
        theta_g0: doc.opt("estimator.theta_g0").map(|_| doc.vector("estimator.theta_g0")).transpose()?,
        theta0: doc.opt("estimator.theta0").map(|_| doc.vector("estimator.theta0")).transpose()?,
        rho_readout,
        sim: SimSettings {
            t_final: doc.f64_or("sim.t_final", sim_default.t_final)?,
            dt: doc.f64_or("sim.dt", sim_default.dt)?,
            record_stride: match doc.opt("sim.record_stride") {
                Some(_) => doc.usize("sim.record_stride")?,
                None => sim_default.record_stride,
            },
        },
        verify: VerifySettings {
            window,
            floor: doc.f64_or("verify.floor", verify_default.floor)?,
        },
    };
    Ok(sc)
}

struct Doc<'a> {
    root: &'a Table,
}

impl<'a> Doc<'a> {
    fn opt(&self, key: &str) -> Option<&'a Value> {
        let mut parts = key.split('.');
        let mut cur = self.root.get(parts.next()?)?;
        for p in parts {
            cur = cur.as_table()?.get(p)?;
        }
        Some(cur)
    }

    fn get(&self, key: &str) -> Result<&'a Value> {
        self.opt(key).ok_or_else(|| Error::scenario(key, "missing"))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        number(self.get(key)?).ok_or_else(|| Error::scenario(key, "expected a number"))
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.opt(key) {
            Some(_) => self.f64(key),
            None => Ok(default),
        }
    }

    fn usize(&self, key: &str) -> Result<usize> {
        match self.get(key)? {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(Error::scenario(key, "expected a non-negative integer")),
        }
    }

    fn vector(&self, key: &str) -> Result<Vec<f64>> {
        let arr = self
            .get(key)?
            .as_array()
            .ok_or_else(|| Error::scenario(key, "expected an array of numbers"))?;
        arr.iter()
            .map(|v| number(v).ok_or_else(|| Error::scenario(key, "expected an array of numbers")))
            .collect()
    }

    fn matrix(&self, key: &str) -> Result<DenseMatrix> {
        let rows = self
            .get(key)?
            .as_array()
            .ok_or_else(|| Error::scenario(key, "expected an array of rows"))?;
        let rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| {
                r.as_array()
                    .ok_or_else(|| Error::scenario(key, "expected an array of rows"))?
                    .iter()
                    .map(|v| number(v).ok_or_else(|| Error::scenario(key, "non-numeric entry")))
                    .collect()
            })
            .collect::<Result<_>>()?;
        DenseMatrix::from_rows(&rows).map_err(|e| Error::scenario(key, e.to_string()))
    }

    fn tv_matrix(&self, key: &str, dim: usize) -> Result<TimeVaryingMatrix> {
        let mut m = TimeVaryingMatrix::zeros(dim, dim);
        let Some(entries) = self.opt(&format!("{key}.entry")) else {
            return Ok(m);
        };
        let entries = entries
            .as_table()
            .ok_or_else(|| Error::scenario(format!("{key}.entry"), "expected entry.<row>.<col> keys"))?;
        for (r, cols) in entries {
            let cols = cols
                .as_table()
                .ok_or_else(|| Error::scenario(format!("{key}.entry.{r}"), "expected entry.<row>.<col> keys"))?;
            for (c, spec) in cols {
                let field = format!("{key}.entry.{r}.{c}");
                let (ri, ci) = match (r.parse::<usize>(), c.parse::<usize>()) {
                    (Ok(ri), Ok(ci)) if (1..=dim).contains(&ri) && (1..=dim).contains(&ci) => (ri, ci),
                    _ => return Err(Error::scenario(field, format!("indices must be in 1..={dim}"))),
                };
                let spec = spec
                    .as_table()
                    .ok_or_else(|| Error::scenario(&field, "expected { a, b, omega, phase }"))?;
                let get = |name: &str| -> Result<f64> {
                    match spec.get(name) {
                        None => Ok(0.0),
                        Some(v) => number(v).ok_or_else(|| Error::scenario(format!("{field}.{name}"), "expected a number")),
                    }
                };
                if let Some(unknown) = spec.keys().find(|k| !["a", "b", "omega", "phase"].contains(&k.as_str())) {
                    return Err(Error::scenario(format!("{field}.{unknown}"), "unknown field"));
                }
                m.set(
                    ri - 1,
                    ci - 1,
                    SinusoidEntry {
                        a: get("a")?,
                        b: get("b")?,
                        omega: get("omega")?,
                        phase: get("phase")?,
                    },
                );
            }
        }
        Ok(m)
    }

    fn sine_terms(&self, key: &str) -> Result<Vec<SineTerm>> {
        let Some(v) = self.opt(key) else {
            return Ok(Vec::new());
        };
        let arr = v
            .as_array()
            .ok_or_else(|| Error::scenario(key, "expected an array of { amplitude, omega, phase }"))?;
        arr.iter()
            .map(|t| {
                let t = t
                    .as_table()
                    .ok_or_else(|| Error::scenario(key, "expected { amplitude, omega, phase }"))?;
                let get = |name: &str| -> Result<f64> {
                    t.get(name).map_or(Ok(0.0), |v| {
                        number(v).ok_or_else(|| Error::scenario(format!("{key}.{name}"), "expected a number"))
                    })
                };
                Ok(SineTerm {
                    amplitude: get("amplitude")?,
                    omega: get("omega")?,
                    phase: get("phase")?,
                })
            })
            .collect()
    }
}

fn number(v: &Value) -> Option<f64> {
    match v {
        Value::Float(f) => Some(*f),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

/// Shortest round-tripping float literal that TOML accepts.
fn num(v: f64) -> String {
    let s = format!("{v:?}");
    if s.contains(['.', 'e', 'E']) || s.contains("inf") || s.contains("NaN") {
        s
    } else {
        format!("{s}.0")
    }
}

fn vec_lit(v: &[f64]) -> String {
    let items: Vec<String> = v.iter().map(|&x| num(x)).collect();
    format!("[{}]", items.join(", "))
}

fn mat_lit(m: &DenseMatrix) -> String {
    let rows: Vec<String> = (0..m.rows()).map(|r| vec_lit(m.row(r))).collect();
    format!("[{}]", rows.join(", "))
}

fn write_tv(out: &mut String, key: &str, m: &TimeVaryingMatrix) {
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            let e = m.entry(r, c);
            if !e.is_zero() {
                let _ = writeln!(
                    out,
                    "{key}.entry.{}.{} = {{ a = {}, b = {}, omega = {}, phase = {} }}",
                    r + 1,
                    c + 1,
                    num(e.a),
                    num(e.b),
                    num(e.omega),
                    num(e.phase)
                );
            }
        }
    }
}

pub fn write_scenario(sc: &Scenario) -> String {
    let mut o = String::new();
    let d = &sc.dims;
    let _ = writeln!(o, "# ltv-observer scenario. Time in seconds, angles in radians.");
    let _ = writeln!(o);
    let _ = writeln!(o, "dims.n = {}", d.n);
    let _ = writeln!(o, "dims.n_theta = {}", d.n_theta);
    let _ = writeln!(o, "dims.n_B = {}", d.n_b);
    let _ = writeln!(o, "dims.n_w = {}", d.n_w);
    let _ = writeln!(o, "dims.n_Gamma = {}", d.n_gamma);
    let _ = writeln!(o);
    let _ = writeln!(o, "# Known parameter generators: entry value = a + b*sin(omega*t + phase)");
    write_tv(&mut o, "A_theta", &sc.a_theta);
    write_tv(&mut o, "A_B", &sc.a_b);
    let _ = writeln!(o, "h_theta = {}", mat_lit(&sc.h_theta));
    let _ = writeln!(o, "h_B = {}", mat_lit(&sc.h_b));
    let _ = writeln!(o);
    let _ = writeln!(o, "# Exosystem at the true parameter, and Gamma = C_Gamma * eta");
    let _ = writeln!(o, "S = {}", mat_lit(&sc.s));
    let _ = writeln!(o, "h_delta = {}", vec_lit(&sc.h_delta));
    let _ = writeln!(o, "C_Gamma = {}", mat_lit(&sc.c_gamma));
    let _ = writeln!(o, "eta = {}", vec_lit(&sc.eta));
    if let Some(r) = &sc.rho_readout {
        let _ = writeln!(o, "rho.matrix = {}", mat_lit(&r.matrix));
        let _ = writeln!(o, "rho.offset = {}", vec_lit(&r.offset));
    }
    let _ = writeln!(o);
    let _ = writeln!(o, "# Hidden truth");
    let _ = writeln!(o, "init.x = {}", vec_lit(&sc.init.x));
    let _ = writeln!(o, "init.x_theta = {}", vec_lit(&sc.init.x_theta));
    let _ = writeln!(o, "init.x_B = {}", vec_lit(&sc.init.x_b));
    let _ = writeln!(o, "init.w = {}", vec_lit(&sc.init.w));
    let _ = writeln!(o);
    let _ = writeln!(o, "input.constant = {}", num(sc.input.constant));
    let terms: Vec<String> = sc
        .input
        .terms
        .iter()
        .map(|t| {
            format!(
                "{{ amplitude = {}, omega = {}, phase = {} }}",
                num(t.amplitude),
                num(t.omega),
                num(t.phase)
            )
        })
        .collect();
    let _ = writeln!(o, "input.terms = [{}]", terms.join(", "));
    let _ = writeln!(o);
    let _ = writeln!(o, "gains.K = {}", vec_lit(&sc.gains.k));
    let _ = writeln!(o, "gains.f = {}", vec_lit(&sc.gains.f));
    let _ = writeln!(o, "gains.f0 = {}", num(sc.gains.f0));
    let _ = writeln!(o, "gains.alpha = {}", num(sc.gains.alpha));
    let _ = writeln!(o, "gains.gamma = {}", num(sc.gains.gamma));
    let _ = writeln!(o);
    let _ = writeln!(o, "noise.amplitude = {}", num(sc.noise.amplitude));
    let _ = writeln!(o, "noise.seed = {}", sc.noise.seed);
    if let Some(v) = &sc.theta_g0 {
        let _ = writeln!(o, "estimator.theta_g0 = {}", vec_lit(v));
    }
    if let Some(v) = &sc.theta0 {
        let _ = writeln!(o, "estimator.theta0 = {}", vec_lit(v));
    }
    let _ = writeln!(o);
    let _ = writeln!(o, "sim.t_final = {}", num(sc.sim.t_final));
    let _ = writeln!(o, "sim.dt = {}", num(sc.sim.dt));
    let _ = writeln!(o, "sim.record_stride = {}", sc.sim.record_stride);
    let _ = writeln!(o, "verify.window = {}", vec_lit(&[sc.verify.window.0, sc.verify.window.1]));
    let _ = writeln!(o, "verify.floor = {}", num(sc.verify.floor));
    o
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::truth::make_example_scenario;

    #[test]
    fn example_round_trips() {
        let sc = make_example_scenario();
        let text = write_scenario(&sc);
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn optional_blocks_round_trip() {
        let mut sc = make_example_scenario().with_slow_gains();
        sc.theta_g0 = Some((0..9).map(|i| i as f64 * 0.1).collect());
        sc.theta0 = Some(vec![1e-7, -3.0, 0.5, 2.0, 1e20]);
        sc.noise.amplitude = 0.05;
        sc.noise.seed = 12345;
        sc.rho_readout = None;
        let back = parse_scenario(&write_scenario(&sc)).unwrap();
        assert_eq!(back, sc);
    }

    #[test]
    fn example_file_keeps_gains() {
        let text = write_scenario(&make_example_scenario());
        assert!(text.contains("gains.f0 = 0.001"));
        assert!(text.contains("gains.alpha = 100.0"));
        assert!(text.contains("gains.gamma = 100.0"));
        assert!(text.contains("A_B.entry.2.1 = { a = -1.0, b = 0.1, omega = 1.0, phase = 0.0 }"));
    }

    #[test]
    fn missing_key_is_named() {
        let text = write_scenario(&make_example_scenario()).replace("gains.K = [7.5, 25.0]\n", "");
        match parse_scenario(&text) {
            Err(Error::Scenario { field, .. }) => assert_eq!(field, "gains.K"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_line() {
        let text = "dims.n = 2\ndims.n_theta = [\n";
        match parse_scenario(text) {
            Err(Error::Parse { line, .. }) => assert!(line >= 2, "line {line}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn n_rho_defaults_to_identity_readout() {
        let mut sc = make_example_scenario();
        sc.rho_readout = None;
        let text = write_scenario(&sc).replace("dims.n_Gamma = 1\n", "dims.n_Gamma = 1\ndims.n_rho = 1\n");
        let back = parse_scenario(&text).unwrap();
        assert_eq!(back.rho_readout.unwrap().matrix, DenseMatrix::identity(1));
    }

    #[test]
    fn bad_entry_index() {
        let text = write_scenario(&make_example_scenario()) + "A_B.entry.3.1 = { a = 1.0 }\n";
        assert!(matches!(parse_scenario(&text), Err(Error::Scenario { .. })));
    }
}
