//! Integer invariants of the components of equivariant minimal surfaces in
//! ℂH²: non-holomorphic components `𝒱(d₁, d₂)` and (anti-)holomorphic
//! components `𝒲±(b, l)`.

use std::fmt::Write as _;

use num_rational::Rational64;

use crate::error::{Error, Result};

/// Upper genus limit for enumeration (the tables grow quadratically).
pub const MAX_GENUS: i64 = 10_000;

fn check_genus(g: i64) -> Result<()> {
    if g < 2 {
        return Err(Error::InvalidInput(format!("genus must be ≥ 2, got {g}")));
    }
    if g > MAX_GENUS {
        return Err(Error::Resource(format!("genus {g} exceeds {MAX_GENUS}")));
    }
    Ok(())
}

/// `d₁`, `d₂` are the degrees of the anti-complex and complex divisors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NonHolComponent {
    g: i64,
    d1: i64,
    d2: i64,
}

impl NonHolComponent {
    /// Requires `2d₁ + d₂ < 6(g−1)` and `d₁ + 2d₂ < 6(g−1)`.
    pub fn new(g: i64, d1: i64, d2: i64) -> Result<Self> {
        check_genus(g)?;
        let bound = 6 * (g - 1);
        if d1 < 0 || d2 < 0 || 2 * d1 + d2 >= bound || d1 + 2 * d2 >= bound {
            return Err(Error::InvalidInput(format!(
                "(d1, d2) = ({d1}, {d2}) violates the stability inequalities for g = {g}"
            )));
        }
        Ok(Self { g, d1, d2 })
    }

    pub fn genus(&self) -> i64 {
        self.g
    }

    pub fn degrees(&self) -> (i64, i64) {
        (self.d1, self.d2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    fn factor(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        }
    }
}

/// `b` is the branching degree, `l` the degree of the line subbundle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HolComponent {
    g: i64,
    sign: Sign,
    b: i64,
    l: i64,
}

impl HolComponent {
    /// Requires `3(g−1) + b/2 < l < 6(g−1) − b` and `0 ≤ b < 2(g−1)`.
    pub fn new(g: i64, sign: Sign, b: i64, l: i64) -> Result<Self> {
        check_genus(g)?;
        let ok = (0..2 * (g - 1)).contains(&b) && 2 * l > 6 * (g - 1) + b && l < 6 * (g - 1) - b;
        if !ok {
            return Err(Error::InvalidInput(format!(
                "(b, l) = ({b}, {l}) violates the holomorphic inequalities for g = {g}"
            )));
        }
        Ok(Self { g, sign, b, l })
    }

    pub fn genus(&self) -> i64 {
        self.g
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn degrees(&self) -> (i64, i64) {
        (self.b, self.l)
    }

    /// The conjugate component.
    pub fn conjugate(&self) -> Self {
        let sign = match self.sign {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        };
        Self { sign, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ComponentReport {
    pub toledo: Rational64,
    /// Euler number of the normal bundle (non-holomorphic only).
    pub euler_normal: Option<i64>,
    pub dim: i64,
    pub fiber_rank: i64,
    /// Critical level of the Hitchin function divided by π (non-holomorphic only).
    pub hitchin_level_over_pi: Option<i64>,
    pub hodge_length: u8,
}

/// All admissible `(d₁, d₂)` in lexicographic order.
pub fn enumerate_nonhol(g: i64) -> Result<Vec<NonHolComponent>> {
    check_genus(g)?;
    let bound = 6 * (g - 1);
    let mut out = Vec::new();
    for d1 in 0..bound {
        for d2 in 0..bound {
            if 2 * d1 + d2 < bound && d1 + 2 * d2 < bound {
                out.push(NonHolComponent { g, d1, d2 });
            }
        }
    }
    Ok(out)
}

pub fn nonhol_invariants(c: &NonHolComponent) -> ComponentReport {
    let NonHolComponent { g, d1, d2 } = *c;
    ComponentReport {
        toledo: Rational64::new(2 * (d2 - d1), 3),
        euler_normal: Some(2 * (g - 1) - d1 - d2),
        dim: 8 * g - 8,
        fiber_rank: 5 * g - 5 - d1 - d2,
        hitchin_level_over_pi: Some(4 * (g - 1) - d1 - d2),
        hodge_length: 3,
    }
}

/// All admissible `(b, l)` in lexicographic order, with sign `+`.
pub fn enumerate_hol(g: i64) -> Result<Vec<HolComponent>> {
    check_genus(g)?;
    let mut out = Vec::new();
    for b in 0..2 * (g - 1) {
        for l in 0..6 * (g - 1) {
            if 2 * l > 6 * (g - 1) + b && l < 6 * (g - 1) - b {
                out.push(HolComponent { g, sign: Sign::Plus, b, l });
            }
        }
    }
    Ok(out)
}

pub fn hol_invariants(c: &HolComponent) -> ComponentReport {
    let HolComponent { g, sign, b, l } = *c;
    ComponentReport {
        toledo: Rational64::new(2 * sign.factor() * (6 * g - 6 - b - l), 3),
        euler_normal: None,
        dim: 3 * (g - 1) + l + 1,
        fiber_rank: l + 1 - b - g,
        hitchin_level_over_pi: None,
        hodge_length: 2,
    }
}

/// A family of representations reducible to `P(U(1,1) × U(1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReducibleComponent {
    pub b: i64,
    pub toledo: i64,
}

/// Even `b < 2(g−1)` with `τ = 2g − 2 − b`.
pub fn reducible_family(g: i64) -> Result<Vec<ReducibleComponent>> {
    check_genus(g)?;
    Ok((0..2 * (g - 1))
        .step_by(2)
        .map(|b| ReducibleComponent { b, toledo: 2 * g - 2 - b })
        .collect())
}

/// For a conformal harmonic map the Hitchin function equals the area of
/// the induced metric.
pub fn hitchin_from_area(area: f64) -> Result<f64> {
    if !(area >= 0.0) || !area.is_finite() {
        return Err(Error::InvalidInput(format!("area must be finite and ≥ 0, got {area}")));
    }
    Ok(area)
}

fn fmt_ratio(r: Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn fmt_level(level: Option<i64>) -> String {
    match level {
        Some(0) => "0".into(),
        Some(1) => "π".into(),
        Some(k) => format!("{k}π"),
        None => String::new(),
    }
}

struct Row {
    family: &'static str,
    sign: &'static str,
    a: i64,
    b: i64,
    report: ComponentReport,
}

fn rows(g: i64) -> Result<Vec<Row>> {
    let mut out = Vec::new();
    for c in enumerate_nonhol(g)? {
        let (d1, d2) = c.degrees();
        out.push(Row {
            family: "V",
            sign: "",
            a: d1,
            b: d2,
            report: nonhol_invariants(&c),
        });
    }
    for c in enumerate_hol(g)? {
        for c in [c, c.conjugate()] {
            let (b, l) = c.degrees();
            out.push(Row {
                family: "W",
                sign: c.sign().symbol(),
                a: b,
                b: l,
                report: hol_invariants(&c),
            });
        }
    }
    Ok(out)
}

/// CSV: `family,sign,a,b,toledo,euler_normal,dim,fiber_rank,hitchin_level,hodge_length`
/// with `(a, b) = (d₁, d₂)` for `V` and `(b, l)` for `W`.
pub fn table_csv(g: i64) -> Result<String> {
    let mut out = String::from("family,sign,a,b,toledo,euler_normal,dim,fiber_rank,hitchin_level,hodge_length\n");
    for r in rows(g)? {
        let rep = r.report;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.family,
            r.sign,
            r.a,
            r.b,
            fmt_ratio(rep.toledo),
            rep.euler_normal.map(|e| e.to_string()).unwrap_or_default(),
            rep.dim,
            rep.fiber_rank,
            fmt_level(rep.hitchin_level_over_pi),
            rep.hodge_length
        )
        .unwrap();
    }
    Ok(out)
}

pub fn table_markdown(g: i64) -> Result<String> {
    let mut out = format!("## Genus {g}\n\n### Non-holomorphic components V(d1, d2)\n\n");
    out.push_str("| d1 | d2 | τ | χ(TΣ⊥) | dim | fiber rank | critical level |\n|---|---|---|---|---|---|---|\n");
    let all = rows(g)?;
    for r in all.iter().filter(|r| r.family == "V") {
        let rep = r.report;
        writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.a,
            r.b,
            fmt_ratio(rep.toledo),
            rep.euler_normal.unwrap(),
            rep.dim,
            rep.fiber_rank,
            fmt_level(rep.hitchin_level_over_pi)
        )
        .unwrap();
    }
    out.push_str("\n### Holomorphic components W±(b, l)\n\n| sign | b | l | τ | dim | fiber rank |\n|---|---|---|---|---|---|\n");
    for r in all.iter().filter(|r| r.family == "W") {
        let rep = r.report;
        writeln!(
            out,
            "| {} | {} | {} | {} | {} | {} |",
            r.sign,
            r.a,
            r.b,
            fmt_ratio(rep.toledo),
            rep.dim,
            rep.fiber_rank
        )
        .unwrap();
    }
    out.push_str("\n### Reducible families\n\n| b | τ |\n|---|---|\n");
    for r in reducible_family(g)? {
        writeln!(out, "| {} | {} |", r.b, r.toledo).unwrap();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> Rational64 {
        Rational64::new(n, d)
    }

    #[test]
    fn genus_two_nonhol_reports() {
        let rep = nonhol_invariants(&NonHolComponent::new(2, 0, 0).unwrap());
        assert_eq!(rep.toledo, r(0, 1));
        assert_eq!(rep.euler_normal, Some(2));
        assert_eq!((rep.dim, rep.fiber_rank), (8, 5));
        assert_eq!(rep.hitchin_level_over_pi, Some(4));
        let rep = nonhol_invariants(&NonHolComponent::new(2, 1, 0).unwrap());
        assert_eq!(rep.toledo, r(-2, 3));
        assert_eq!((rep.euler_normal, rep.fiber_rank), (Some(1), 4));
        assert!(enumerate_nonhol(3).unwrap().iter().all(|c| nonhol_invariants(c).dim == 16));
    }

    #[test]
    fn genus_two_hol_reports() {
        let rep = hol_invariants(&HolComponent::new(2, Sign::Plus, 0, 4).unwrap());
        assert_eq!((rep.toledo, rep.dim, rep.fiber_rank), (r(4, 3), 8, 3));
        let rep = hol_invariants(&HolComponent::new(2, Sign::Plus, 0, 5).unwrap());
        assert_eq!((rep.toledo, rep.dim, rep.fiber_rank), (r(2, 3), 9, 4));
        let minus = hol_invariants(&HolComponent::new(2, Sign::Minus, 0, 5).unwrap());
        assert_eq!(minus.toledo, r(-2, 3));
    }

    #[test]
    fn reducible_lists() {
        assert_eq!(reducible_family(2).unwrap(), vec![ReducibleComponent { b: 0, toledo: 2 }]);
        let g3: Vec<_> = reducible_family(3).unwrap().iter().map(|c| (c.b, c.toledo)).collect();
        assert_eq!(g3, vec![(0, 4), (2, 2)]);
    }

    #[test]
    fn guards() {
        assert!(enumerate_nonhol(1).is_err());
        assert!(enumerate_hol(MAX_GENUS + 1).is_err());
        assert!(NonHolComponent::new(2, 2, 2).is_err());
        assert!(HolComponent::new(2, Sign::Plus, 0, 3).is_err());
        assert!(hitchin_from_area(-1.0).is_err());
        assert_eq!(hitchin_from_area(0.0).unwrap(), 0.0);
    }

    #[test]
    fn tables_list_every_component() {
        let csv = table_csv(2).unwrap();
        // 8 non-holomorphic + 3·2 holomorphic + header
        assert_eq!(csv.lines().count(), 15);
        assert!(csv.contains("\nV,,0,0,0,2,8,5,4π,3\n"));
        assert!(csv.contains("\nW,+,0,4,4/3,,8,3,,2\n"));
        let md = table_markdown(2).unwrap();
        assert!(md.contains("| + | 1 | 4 | 2/3 | 8 | 2 |"));
        assert!(md.contains("| - | 1 | 4 | -2/3 | 8 | 2 |"));
    }
}
