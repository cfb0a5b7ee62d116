//! Flat text format for policy tables.
//!
//! ```text
//! bhedge-policy 1
//! trading-dates N
//! step n dims 3|5 price 0|1 clamp 0|1
//! axis S|I|V|D1|D2 count x1 x2 ...
//! clamp lo1 hi1 lo2 hi2
//! delta1 x1 x2 ...      row-major, S slowest, δ² fastest
//! delta2 ...
//! price ...
//! end
//! ```
//! Numbers use the shortest representation that parses back to the same bits.

use std::fmt::Write as _;

use super::{GridAxis, PolicyStep, PolicyTable, StateGrid};
use crate::error::{Error, Result};
use crate::scalar::Real;

const MAGIC: &str = "bhedge-policy 1";

fn push_values<F: Real>(out: &mut String, label: &str, xs: &[F]) {
    out.push_str(label);
    for x in xs {
        write!(out, " {x}").unwrap();
    }
    out.push('\n');
}

pub fn write_policy<F: Real>(table: &PolicyTable<F>) -> String {
    let mut out = String::new();
    writeln!(out, "{MAGIC}").unwrap();
    writeln!(out, "trading-dates {}", table.n_trading).unwrap();
    for st in &table.steps {
        let g = &st.grid;
        writeln!(
            out,
            "step {} dims {} price {} clamp {}",
            g.step,
            g.dims(),
            st.price.is_some() as u8,
            st.clamp.is_some() as u8
        )
        .unwrap();
        let mut axes = vec![("S", &g.s), ("I", &g.i), ("V", &g.v)];
        if let Some([a, b]) = &g.delta {
            axes.push(("D1", a));
            axes.push(("D2", b));
        }
        for (name, ax) in axes {
            push_values(&mut out, &format!("axis {name} {}", ax.len()), ax.nodes());
        }
        if let Some(c) = &st.clamp {
            push_values(&mut out, "clamp", &[c[0][0], c[0][1], c[1][0], c[1][1]]);
        }
        push_values(&mut out, "delta1", &st.delta1);
        push_values(&mut out, "delta2", &st.delta2);
        if let Some(p) = &st.price {
            push_values(&mut out, "price", p);
        }
        out.push_str("end\n");
    }
    out
}

struct Lines<'a> {
    it: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self) -> Result<Vec<&'a str>> {
        loop {
            let (n, l) = self.it.next().ok_or(Error::Parse {
                line: self.line + 1,
                msg: "unexpected end of input".into(),
            })?;
            self.line = n + 1;
            let t = l.trim();
            if !t.is_empty() {
                return Ok(t.split_ascii_whitespace().collect());
            }
        }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn expect(&mut self, head: &str) -> Result<Vec<&'a str>> {
        let t = self.next()?;
        if t.first() != Some(&head) {
            return Err(self.err(format!("expected `{head}`")));
        }
        Ok(t)
    }

    fn number<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("bad number `{s}`")))
    }

    fn values<F: Real>(&mut self, head: &str) -> Result<Vec<F>> {
        let t = self.expect(head)?;
        t[1..].iter().map(|s| self.number(s)).collect()
    }

    fn axis<F: Real>(&mut self, name: &str) -> Result<GridAxis<F>> {
        let t = self.expect("axis")?;
        if t.get(1) != Some(&name) || t.len() < 3 {
            return Err(self.err(format!("expected axis {name}")));
        }
        let count: usize = self.number(t[2])?;
        let xs: Vec<F> = t[3..].iter().map(|s| self.number(s)).collect::<Result<_>>()?;
        if xs.len() != count {
            return Err(self.err("axis count mismatch"));
        }
        GridAxis::new(xs).map_err(|e| self.err(e.to_string()))
    }
}

pub fn parse_policy<F: Real>(text: &str) -> Result<PolicyTable<F>> {
    let mut ln = Lines {
        it: text.lines().enumerate(),
        line: 0,
    };
    if ln.next()?.join(" ") != MAGIC {
        return Err(ln.err("missing header"));
    }
    let t = ln.expect("trading-dates")?;
    let n_trading: usize = ln.number(t.get(1).copied().unwrap_or(""))?;
    let mut steps = Vec::new();
    loop {
        let t = match ln.next() {
            Ok(t) => t,
            Err(_) => break,
        };
        if t.len() != 8 || t[0] != "step" {
            return Err(ln.err("expected step header"));
        }
        let step: usize = ln.number(t[1])?;
        let dims: usize = ln.number(t[3])?;
        let has_price = t[5] == "1";
        let has_clamp = t[7] == "1";
        let s = ln.axis("S")?;
        let i = ln.axis("I")?;
        let v = ln.axis("V")?;
        let delta = if dims == 5 {
            Some([ln.axis("D1")?, ln.axis("D2")?])
        } else {
            None
        };
        let clamp = if has_clamp {
            let c: Vec<F> = ln.values("clamp")?;
            if c.len() != 4 {
                return Err(ln.err("clamp needs four values"));
            }
            Some([[c[0], c[1]], [c[2], c[3]]])
        } else {
            None
        };
        let delta1 = ln.values("delta1")?;
        let delta2 = ln.values("delta2")?;
        let price = if has_price { Some(ln.values("price")?) } else { None };
        ln.expect("end")?;
        let st = PolicyStep {
            grid: StateGrid { step, s, i, v, delta },
            delta1,
            delta2,
            price,
            clamp,
        };
        st.validate().map_err(|e| ln.err(e.to_string()))?;
        steps.push(st);
    }
    Ok(PolicyTable { n_trading, steps })
}
