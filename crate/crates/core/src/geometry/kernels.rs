//! Sitewise Chern-geometric formulas on a [`SiteJet`].
//!
//! Inverse metrics are passed as `ginv[a*n + b] = g^{āb}`, so the usual
//! `g^{l̄k}` is `ginv[l*n + k]`. Index layouts follow [`SiteJet`]; rank-3
//! outputs are `[(i*n + j)*n + k]`, rank-4 `[((k*n + l)*n + r)*n + s]`.

use num_complex::Complex64;

use super::jets::SiteJet;
use crate::error::{Error, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// `Γ_{ij}^k = g^{r̄k} Z_i g_{jr̄}`
pub fn christoffel(jet: &SiteJet, ginv: &[C], out: &mut [C]) {
    let n = jet.n;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let mut s = ZERO;
                for r in 0..n {
                    s += ginv[r * n + k] * jet.d[(i * n + j) * n + r];
                }
                out[(i * n + j) * n + k] = s;
            }
        }
    }
}

/// `T_{ij}^k = Γ_{ij}^k - Γ_{ji}^k + T̂_{ij}^k` with `T̂ = -c`, so that a
/// constant metric has `T(Z_i, Z_j) = -[Z_i, Z_j]`.
pub fn torsion(gamma: &[C], c: &[C], n: usize, out: &mut [C]) {
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let a = (i * n + j) * n + k;
                out[a] = gamma[a] - gamma[(j * n + i) * n + k] - c[a];
            }
        }
    }
}

/// `w_k = Γ_{kr}^r`
pub fn torsion_trace(gamma: &[C], n: usize, out: &mut [C]) {
    for k in 0..n {
        out[k] = (0..n).map(|r| gamma[(k * n + r) * n + r]).sum();
    }
}

/// `|w|^2 = g^{k̄j} w_j conj(w_k)`
pub fn w_norm_sq(w: &[C], ginv: &[C], n: usize) -> (C, f64) {
    let mut s = ZERO;
    let mut scale = 0.0;
    for k in 0..n {
        for j in 0..n {
            let t = ginv[k * n + j] * w[j] * w[k].conj();
            scale += t.norm();
            s += t;
        }
    }
    (s, scale)
}

/// `P_k[r][a] = sum_b (Z_k g_{rb̄}) g^{b̄a}`, stored `[(k*n + r)*n + a]`.
fn pk(jet: &SiteJet, ginv: &[C], out: &mut [C]) {
    let n = jet.n;
    for k in 0..n {
        for r in 0..n {
            for a in 0..n {
                let mut s = ZERO;
                for b in 0..n {
                    s += jet.d[(k * n + r) * n + b] * ginv[b * n + a];
                }
                out[(k * n + r) * n + a] = s;
            }
        }
    }
}

/// `R_{kl̄rs̄} = -Z_k Z_l̄ g_{rs̄} + g^{b̄a} (Z_l̄ g_{as̄}) (Z_k g_{rb̄})`
pub fn curvature(jet: &SiteJet, ginv: &[C], scratch: &mut [C], out: &mut [C]) {
    let n = jet.n;
    let p = &mut scratch[..n * n * n];
    pk(jet, ginv, p);
    for k in 0..n {
        for l in 0..n {
            for r in 0..n {
                for s in 0..n {
                    let mut v = -jet.dd[((k * n + l) * n + r) * n + s];
                    for a in 0..n {
                        v += p[(k * n + r) * n + a] * jet.db[(l * n + a) * n + s];
                    }
                    out[((k * n + l) * n + r) * n + s] = v;
                }
            }
        }
    }
}

/// `R̃_{rs̄} = -Δ_g g_{rs̄} + g^{l̄k} g^{b̄a} (Z_l̄ g_{as̄}) (Z_k g_{rb̄})`
pub fn second_chern_ricci(jet: &SiteJet, ginv: &[C], scratch: &mut [C], out: &mut [C]) {
    let n = jet.n;
    let n3 = n * n * n;
    let (p, f) = scratch[..2 * n3].split_at_mut(n3);
    pk(jet, ginv, p);
    // F_l[r][a] = sum_k g^{l̄k} P_k[r][a]
    for l in 0..n {
        for ra in 0..n * n {
            let mut s = ZERO;
            for k in 0..n {
                s += ginv[l * n + k] * p[k * n * n + ra];
            }
            f[l * n * n + ra] = s;
        }
    }
    for r in 0..n {
        for s in 0..n {
            let mut v = ZERO;
            for k in 0..n {
                for l in 0..n {
                    v -= ginv[l * n + k] * jet.dd[((k * n + l) * n + r) * n + s];
                }
            }
            for l in 0..n {
                for a in 0..n {
                    v += f[(l * n + r) * n + a] * jet.db[(l * n + a) * n + s];
                }
            }
            out[r * n + s] = v;
        }
    }
}

/// `R̃_{rs̄} = g^{l̄k} R_{kl̄rs̄}` from a precomputed curvature.
pub fn trace_first_pair(curv: &[C], ginv: &[C], n: usize, out: &mut [C]) {
    for r in 0..n {
        for s in 0..n {
            let mut v = ZERO;
            for k in 0..n {
                for l in 0..n {
                    v += ginv[l * n + k] * curv[((k * n + l) * n + r) * n + s];
                }
            }
            out[r * n + s] = v;
        }
    }
}

/// `Ric_{rs̄} = g^{l̄k} R_{rs̄kl̄}`
pub fn trace_second_pair(curv: &[C], ginv: &[C], n: usize, out: &mut [C]) {
    for r in 0..n {
        for s in 0..n {
            let mut v = ZERO;
            for k in 0..n {
                for l in 0..n {
                    v += ginv[l * n + k] * curv[((r * n + s) * n + k) * n + l];
                }
            }
            out[r * n + s] = v;
        }
    }
}

/// `S = g^{m̄i} g^{p̄j} g^{r̄k} (Z_i g_{jr̄}) (Z_m̄ g_{kp̄})`, written as
/// `g^{m̄i} g^{p̄j} Γ_{ij}^k Z_m̄ g_{kp̄}`. Returns the value and the sum of
/// term magnitudes.
pub fn gamma_norm(jet: &SiteJet, gamma: &[C], ginv: &[C], scratch: &mut [C]) -> (C, f64) {
    let n = jet.n;
    let n3 = n * n * n;
    let (u, v) = scratch[..2 * n3].split_at_mut(n3);
    // U[m][j][k] = g^{m̄i} Γ_{ij}^k
    for m in 0..n {
        for jk in 0..n * n {
            let mut s = ZERO;
            for i in 0..n {
                s += ginv[m * n + i] * gamma[i * n * n + jk];
            }
            u[m * n * n + jk] = s;
        }
    }
    // V[m][p][k] = g^{p̄j} U[m][j][k]
    for m in 0..n {
        for p in 0..n {
            for k in 0..n {
                let mut s = ZERO;
                for j in 0..n {
                    s += ginv[p * n + j] * u[(m * n + j) * n + k];
                }
                v[(m * n + p) * n + k] = s;
            }
        }
    }
    let mut total = ZERO;
    let mut scale = 0.0;
    for m in 0..n {
        for p in 0..n {
            for k in 0..n {
                let t = v[(m * n + p) * n + k] * jet.db[(m * n + k) * n + p];
                scale += t.norm();
                total += t;
            }
        }
    }
    (total, scale)
}

/// `|T|^2 = g_{kq̄} g^{m̄i} g^{p̄j} T_{ij}^k conj(T_{mp}^q)`
pub fn torsion_norm(t: &[C], g: &[C], ginv: &[C], n: usize, scratch: &mut [C]) -> (C, f64) {
    let n3 = n * n * n;
    let (y, z) = scratch[..2 * n3].split_at_mut(n3);
    // Y[i][j][q] = T_{ij}^k g_{kq̄}
    for ij in 0..n * n {
        for q in 0..n {
            let mut s = ZERO;
            for k in 0..n {
                s += t[ij * n + k] * g[k * n + q];
            }
            y[ij * n + q] = s;
        }
    }
    // Z[m][j][q] = g^{m̄i} Y[i][j][q]
    for m in 0..n {
        for jq in 0..n * n {
            let mut s = ZERO;
            for i in 0..n {
                s += ginv[m * n + i] * y[i * n * n + jq];
            }
            z[m * n * n + jq] = s;
        }
    }
    let mut total = ZERO;
    let mut scale = 0.0;
    for m in 0..n {
        for p in 0..n {
            for q in 0..n {
                let mut w = ZERO;
                for j in 0..n {
                    w += ginv[p * n + j] * z[(m * n + j) * n + q];
                }
                let v = w * t[(m * n + p) * n + q].conj();
                scale += v.norm();
                total += v;
            }
        }
    }
    (total, scale)
}

/// `tr_h g = sum h^{s̄r} g_{rs̄}` given the inverse of `h`.
pub fn trace_relative(hinv: &[C], g: &[C], n: usize) -> C {
    let mut s = ZERO;
    for r in 0..n {
        for t in 0..n {
            s += hinv[t * n + r] * g[r * n + t];
        }
    }
    s
}

/// Real part of a quantity that must be real and nonnegative, after checking
/// the imaginary residue relative to the magnitude of its terms.
pub fn nonnegative_real(value: C, scale: f64, site: usize, what: &str) -> Result<f64> {
    let tol = 1e-12 * scale.max(1.0);
    if value.im.abs() > tol {
        return Err(Error::Consistency(format!(
            "{what} has imaginary part {:.3e} at site {site}",
            value.im
        )));
    }
    if value.re < -tol {
        return Err(Error::Consistency(format!("{what} = {:.3e} < 0 at site {site}", value.re)));
    }
    Ok(value.re.max(0.0))
}

/// Scratch length sufficient for every kernel in this module.
pub fn scratch_len(n: usize) -> usize {
    2 * n * n * n
}
