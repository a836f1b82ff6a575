//! Structure constants of the complex Lie algebras behind the cataloged
//! parallelizable manifolds.
//!
//! Convention: constants are read off vector-field brackets,
//! `[Z_i, Z_j] = sum_k c[i][j][k] Z_k`. A coframe relation `dζ^k = ζ^i ∧ ζ^j`
//! corresponds to `c_ij^k = -1` under `dα(X,Y) = Xα(Y) - Yα(X) - α([X,Y])`,
//! which is why the Iwasawa algebra stores `c_12^3 = -1`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Names accepted by [`LieGroupSpec::catalog`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GroupName {
    /// Flat complex torus of the given dimension.
    Abelian(usize),
    /// Complex Heisenberg group (Iwasawa manifold).
    Nil3,
    /// `SL(2, C)`.
    Sl2c,
    /// Solvable family `S_{3,λ}`.
    S3Lambda,
}

impl FromStr for GroupName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim().to_ascii_lowercase();
        match t.as_str() {
            "nil3" | "iwasawa" => return Ok(GroupName::Nil3),
            "sl2c" => return Ok(GroupName::Sl2c),
            "s3lambda" => return Ok(GroupName::S3Lambda),
            _ => {}
        }
        let dim = t
            .strip_prefix("abelian")
            .map(|rest| rest.trim_start_matches('(').trim_end_matches(')'))
            .and_then(|d| d.parse::<usize>().ok())
            .filter(|&n| n > 0);
        dim.map(GroupName::Abelian)
            .ok_or_else(|| Error::UnknownGroup(s.to_string()))
    }
}

impl fmt::Display for GroupName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupName::Abelian(n) => write!(f, "abelian({n})"),
            GroupName::Nil3 => write!(f, "nil3"),
            GroupName::Sl2c => write!(f, "sl2c"),
            GroupName::S3Lambda => write!(f, "s3lambda"),
        }
    }
}

/// Complex Lie algebra given by structure constants in a fixed frame.
#[derive(Clone, Debug, PartialEq)]
pub struct LieGroupSpec {
    pub name: String,
    n: usize,
    c: Vec<Complex64>,
    pub lambda: Option<Complex64>,
}

impl LieGroupSpec {
    /// All-zero structure constants in dimension `n`.
    pub fn abelian(n: usize) -> Self {
        LieGroupSpec {
            name: GroupName::Abelian(n).to_string(),
            n,
            c: vec![Complex64::new(0.0, 0.0); n * n * n],
            lambda: None,
        }
    }

    /// Builds a spec from explicit brackets `[Z_i, Z_j] = coeff Z_k` (0-based
    /// indices, `i < j`); the antisymmetric completion is filled in.
    pub fn from_brackets(name: &str, n: usize, brackets: &[(usize, usize, usize, Complex64)]) -> Result<Self> {
        let mut spec = LieGroupSpec::abelian(n);
        spec.name = name.to_string();
        for &(i, j, k, v) in brackets {
            if i >= n || j >= n || k >= n {
                return Err(Error::IndexOutOfRange { index: i.max(j).max(k), dim: n });
            }
            spec.c[(i * n + j) * n + k] += v;
            spec.c[(j * n + i) * n + k] -= v;
        }
        Ok(spec)
    }

    /// Structure constants straight from a dense `n^3` array, no completion.
    pub fn from_raw(name: &str, n: usize, c: Vec<Complex64>) -> Result<Self> {
        if c.len() != n * n * n {
            return Err(Error::Shape(format!(
                "structure constants need {} entries, got {}",
                n * n * n,
                c.len()
            )));
        }
        Ok(LieGroupSpec { name: name.to_string(), n, c, lambda: None })
    }

    pub fn catalog(name: GroupName, lambda: Option<Complex64>) -> Result<Self> {
        let one = Complex64::new(1.0, 0.0);
        let mut spec = match name {
            GroupName::Abelian(n) => LieGroupSpec::abelian(n),
            GroupName::Nil3 => LieGroupSpec::from_brackets("nil3", 3, &[(0, 1, 2, -one)])?,
            GroupName::Sl2c => LieGroupSpec::from_brackets(
                "sl2c",
                3,
                &[(0, 1, 2, one), (0, 2, 1, -one), (1, 2, 0, one)],
            )?,
            GroupName::S3Lambda => {
                let lam = lambda.ok_or(Error::MissingLambda)?;
                let mut s =
                    LieGroupSpec::from_brackets("s3lambda", 3, &[(0, 1, 1, one), (0, 2, 2, lam)])?;
                s.lambda = Some(lam);
                s
            }
        };
        if !matches!(name, GroupName::S3Lambda) {
            spec.lambda = None;
        }
        Ok(spec)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `c_ij^k`, 0-based.
    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.c[(i * self.n + j) * self.n + k]
    }

    pub fn constants(&self) -> &[Complex64] {
        &self.c
    }

    /// Same algebra with every constant negated (frame `Z -> -Z`).
    pub fn negated(&self) -> Self {
        LieGroupSpec { c: self.c.iter().map(|v| -v).collect(), ..self.clone() }
    }

    pub fn is_abelian(&self) -> bool {
        self.c.iter().all(|v| *v == Complex64::new(0.0, 0.0))
    }

    /// Text form, one nonzero component per line: `c i j k re im` (1-based).
    pub fn to_text(&self) -> String {
        let mut out = format!("# {} n={}\n", self.name, self.n);
        let n = self.n;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let v = self.c(i, j, k);
                    if v != Complex64::new(0.0, 0.0) {
                        out.push_str(&format!(
                            "c {} {} {} {:.17e} {:.17e}\n",
                            i + 1,
                            j + 1,
                            k + 1,
                            v.re,
                            v.im
                        ));
                    }
                }
            }
        }
        out
    }
}

/// Outcome of the structural checks; failures are recorded, not raised.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub antisymmetric: bool,
    pub jacobi: bool,
    pub unimodular: bool,
    /// `sum_r c_ir^r` for every `i`.
    pub traces: Vec<Complex64>,
    pub failures: Vec<String>,
}

impl ValidationReport {
    /// Antisymmetry and Jacobi; unimodularity is reported separately since
    /// non-unimodular groups are legitimate algebras, just without lattices.
    pub fn is_lie_algebra(&self) -> bool {
        self.antisymmetric && self.jacobi
    }
}

/// Exact checks (tolerance 0) of antisymmetry, Jacobi and unimodularity.
pub fn validate_structure(spec: &LieGroupSpec) -> ValidationReport {
    let n = spec.n;
    let zero = Complex64::new(0.0, 0.0);
    let mut failures = Vec::new();

    let mut antisymmetric = true;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if spec.c(i, j, k) != -spec.c(j, i, k) {
                    antisymmetric = false;
                    failures.push(format!("antisymmetry fails at c_{}{}^{}", i + 1, j + 1, k + 1));
                }
            }
        }
    }

    let mut jacobi = true;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let mut s = zero;
                    for m in 0..n {
                        s += spec.c(i, j, m) * spec.c(m, k, l)
                            + spec.c(j, k, m) * spec.c(m, i, l)
                            + spec.c(k, i, m) * spec.c(m, j, l);
                    }
                    if s != zero {
                        jacobi = false;
                        failures.push(format!(
                            "Jacobi fails at (i,j,k,l)=({},{},{},{}): {s}",
                            i + 1,
                            j + 1,
                            k + 1,
                            l + 1
                        ));
                    }
                }
            }
        }
    }

    let traces: Vec<Complex64> =
        (0..n).map(|i| (0..n).map(|r| spec.c(i, r, r)).sum()).collect();
    let unimodular = traces.iter().all(|t| *t == zero);
    if !unimodular {
        for (i, t) in traces.iter().enumerate() {
            if *t != zero {
                failures.push(format!("not unimodular: sum_r c_{}r^r = {t}", i + 1));
            }
        }
    }

    ValidationReport { antisymmetric, jacobi, unimodular, traces, failures }
}

/// Torsion constants `T̂_ij^k` of an invariant metric in the frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TorsionConstants {
    n: usize,
    t: Vec<Complex64>,
}

impl TorsionConstants {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.t[(i * self.n + j) * self.n + k]
    }

    /// `sum_r T̂_ir^r`; vanishes for balanced invariant metrics.
    pub fn trace(&self) -> Vec<Complex64> {
        (0..self.n).map(|i| (0..self.n).map(|r| self.get(i, r, r)).sum()).collect()
    }
}

/// `T̂_ij^k = -c_ij^k`, since invariant metrics are Chern-flat and
/// `T(Z_i, Z_j) = -[Z_i, Z_j]`.
pub fn chern_flat_torsion(spec: &LieGroupSpec) -> TorsionConstants {
    TorsionConstants { n: spec.n, t: spec.c.iter().map(|v| -v).collect() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cx(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn sl2c_brackets() {
        let s = LieGroupSpec::catalog(GroupName::Sl2c, None).unwrap();
        assert_eq!(s.c(0, 1, 2), cx(1.0));
        assert_eq!(s.c(0, 2, 1), cx(-1.0));
        assert_eq!(s.c(1, 2, 0), cx(1.0));
        assert_eq!(s.c(1, 0, 2), cx(-1.0));
        let nonzero = s.constants().iter().filter(|v| **v != cx(0.0)).count();
        assert_eq!(nonzero, 6);
    }

    #[test]
    fn abelian_is_zero() {
        let s = LieGroupSpec::catalog(GroupName::Abelian(2), None).unwrap();
        assert!(s.constants().iter().all(|v| *v == cx(0.0)));
        assert!(s.is_abelian());
    }

    #[test]
    fn s3_minus_one() {
        let s = LieGroupSpec::catalog(GroupName::S3Lambda, Some(cx(-1.0))).unwrap();
        assert_eq!(s.c(0, 1, 1), cx(1.0));
        assert_eq!(s.c(0, 2, 2), cx(-1.0));
        let nonzero = s.constants().iter().filter(|v| **v != cx(0.0)).count();
        assert_eq!(nonzero, 4);
        assert!(validate_structure(&s).unimodular);
    }

    #[test]
    fn s3_lambda_two_not_unimodular() {
        let s = LieGroupSpec::catalog(GroupName::S3Lambda, Some(cx(2.0))).unwrap();
        let rep = validate_structure(&s);
        assert!(rep.is_lie_algebra());
        assert!(!rep.unimodular);
        // sum_r c_1r^r = c_12^2 + c_13^3 = 1 + λ
        assert_eq!(rep.traces[0], cx(3.0));
        assert_eq!(rep.traces[1], cx(0.0));
    }

    #[test]
    fn missing_lambda_and_unknown_name() {
        assert!(matches!(
            LieGroupSpec::catalog(GroupName::S3Lambda, None),
            Err(Error::MissingLambda)
        ));
        assert!("heisenberg5".parse::<GroupName>().is_err());
        assert_eq!("abelian(3)".parse::<GroupName>().unwrap(), GroupName::Abelian(3));
        assert_eq!("abelian2".parse::<GroupName>().unwrap(), GroupName::Abelian(2));
        assert!("abelian(0)".parse::<GroupName>().is_err());
    }

    #[test]
    fn catalog_validates() {
        for name in [GroupName::Abelian(1), GroupName::Abelian(3), GroupName::Nil3, GroupName::Sl2c] {
            let rep = validate_structure(&LieGroupSpec::catalog(name, None).unwrap());
            assert!(rep.antisymmetric && rep.jacobi && rep.unimodular, "{name}: {:?}", rep.failures);
        }
    }

    #[test]
    fn broken_jacobi_detected() {
        // [Z1,Z2]=Z3 and [Z1,Z3]=Z1 violate Jacobi in dimension 3
        let s = LieGroupSpec::from_brackets("bad", 3, &[(0, 1, 2, cx(1.0)), (0, 2, 0, cx(1.0)), (1, 2, 1, cx(1.0))])
            .unwrap();
        let rep = validate_structure(&s);
        assert!(rep.antisymmetric);
        assert!(!rep.jacobi);
        let raw = LieGroupSpec::from_raw("raw", 2, {
            let mut c = vec![cx(0.0); 8];
            c[1] = cx(1.0); // c_11^2 != -c_11^2
            c
        })
        .unwrap();
        assert!(!validate_structure(&raw).antisymmetric);
    }

    #[test]
    fn torsion_constants() {
        let nil = LieGroupSpec::catalog(GroupName::Nil3, None).unwrap();
        let t = chern_flat_torsion(&nil);
        assert_eq!(t.get(0, 1, 2), -nil.c(0, 1, 2));
        assert_eq!(t.get(0, 1, 2), cx(1.0));
        let independent_nonzero = (0..3)
            .flat_map(|i| (i + 1..3).flat_map(move |j| (0..3).map(move |k| (i, j, k))))
            .filter(|&(i, j, k)| t.get(i, j, k) != cx(0.0))
            .count();
        assert_eq!(independent_nonzero, 1);

        let sl = chern_flat_torsion(&LieGroupSpec::catalog(GroupName::Sl2c, None).unwrap());
        assert_eq!(sl.get(0, 1, 2), cx(-1.0));
        assert_eq!(sl.get(0, 2, 1), cx(1.0));
        assert_eq!(sl.get(1, 2, 0), cx(-1.0));

        let ab = chern_flat_torsion(&LieGroupSpec::abelian(4));
        assert!(ab.t.iter().all(|v| *v == cx(0.0)));
    }

    #[test]
    fn balanced_trace_for_unimodular() {
        for spec in [
            LieGroupSpec::catalog(GroupName::Nil3, None).unwrap(),
            LieGroupSpec::catalog(GroupName::Sl2c, None).unwrap(),
            LieGroupSpec::catalog(GroupName::S3Lambda, Some(cx(-1.0))).unwrap(),
        ] {
            assert!(chern_flat_torsion(&spec).trace().iter().all(|v| *v == cx(0.0)));
        }
    }

    #[test]
    fn text_lines() {
        let s = LieGroupSpec::catalog(GroupName::Nil3, None).unwrap();
        let txt = s.to_text();
        let lines: Vec<_> = txt.lines().filter(|l| l.starts_with("c ")).collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("c 1 2 3 -1.0"));
    }
}
