//! Multivariate polynomial gcd over the rationals.
//!
//! Content/primitive recursion on the highest active variable with a
//! primitive pseudo-remainder sequence in that variable. Chosen for
//! correctness over speed; the polynomials in this crate stay small.

use num_rational::BigRational;

use super::polynomial::Polynomial;

/// Monic gcd of two polynomials. `gcd(0, 0) = 0`; otherwise the result is
/// nonzero with leading coefficient 1 under the graded lex order.
pub fn poly_gcd(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_zero() {
        return b.monic();
    }
    if b.is_zero() {
        return a.monic();
    }
    // nonzero constants are units over Q
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Polynomial::one(a.vars());
    }
    if a == b {
        return a.monic();
    }
    let mut active = a.active_vars();
    for v in b.active_vars() {
        if !active.contains(&v) {
            active.push(v);
        }
    }
    if active.is_empty() {
        // two nonzero constants: units over Q
        return Polynomial::one(a.vars());
    }
    let main = *active.iter().max().unwrap();
    if active.len() == 1 {
        // single-variable inputs: monic Euclid over Q, no coefficient blowup
        return univariate_gcd(a, b, main);
    }
    if a.degree_in(main) == 0 {
        return poly_gcd(a, &content_in(b, main));
    }
    if b.degree_in(main) == 0 {
        return poly_gcd(&content_in(a, main), b);
    }

    let ca = content_in(a, main);
    let cb = content_in(b, main);
    let cg = poly_gcd(&ca, &cb);
    let mut p = a.exact_div(&ca);
    let mut q = b.exact_div(&cb);
    // evaluation fast path: specialize the other variables at a random point
    // where neither leading coefficient vanishes. The specialized gcd degree
    // bounds the true gcd degree from above, so degree zero proves the
    // primitive parts coprime and skips the expensive remainder sequence.
    if primitive_parts_coprime_by_evaluation(&p, &q, main) {
        return cg.monic();
    }
    if p.degree_in(main) < q.degree_in(main) {
        std::mem::swap(&mut p, &mut q);
    }
    loop {
        let r = pseudo_rem(&p, &q, main);
        if r.is_zero() {
            let prim = q.exact_div(&content_in(&q, main));
            return (&cg * &prim).monic();
        }
        p = q;
        // content division controls polynomial growth, the monic scaling
        // kills the rational-scalar growth of the pseudo-remainders
        q = r.exact_div(&content_in(&r, main)).monic();
    }
}

/// Euclid with monic normalization for polynomials in one variable.
fn univariate_gcd(a: &Polynomial, b: &Polynomial, main: usize) -> Polynomial {
    let to_dense = |p: &Polynomial| {
        let mut v = vec![BigRational::from_integer(0.into()); p.degree_in(main) as usize + 1];
        for (m, c) in p.terms() {
            v[m.0[main] as usize] = c.clone();
        }
        v
    };
    let trim = |v: &mut Vec<BigRational>| {
        while v.last().map(num_traits::Zero::is_zero).unwrap_or(false) {
            v.pop();
        }
    };
    let mut p = to_dense(a);
    let mut q = to_dense(b);
    trim(&mut p);
    trim(&mut q);
    while !q.is_empty() {
        // p mod q, dividing through by the leading coefficient as we go
        let lead = q.last().unwrap().clone();
        for c in q.iter_mut() {
            *c = &*c / &lead;
        }
        while p.len() >= q.len() && !p.is_empty() {
            let f = p.last().unwrap().clone();
            let shift = p.len() - q.len();
            for (i, bc) in q.iter().enumerate() {
                let t = &f * bc;
                p[shift + i] -= t;
            }
            trim(&mut p);
        }
        std::mem::swap(&mut p, &mut q);
    }
    let vars = a.vars();
    let terms: Vec<(Vec<u32>, BigRational)> = p
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !num_traits::Zero::is_zero(c))
        .map(|(e, c)| {
            let mut exps = vec![0u32; vars.len()];
            exps[main] = e as u32;
            (exps, c)
        })
        .collect();
    Polynomial::from_terms(vars, terms).monic()
}

/// True when a random specialization certifies `gcd(p, q) = 1` for primitive
/// `p`, `q` in the main variable. False answers are merely inconclusive.
fn primitive_parts_coprime_by_evaluation(
    p: &Polynomial,
    q: &Polynomial,
    main: usize,
) -> bool {
    let nvars = p.vars().len();
    for attempt in 0..4u64 {
        let point: Vec<BigRational> = (0..nvars)
            .map(|i| {
                // deterministic quasi-random small integers, never zero
                let h = (attempt * 131 + i as u64 * 31 + 7) % 19;
                let v = h as i64 - 9;
                BigRational::from_integer(if v == 0 { 10 } else { v }.into())
            })
            .collect();
        let pu = specialize(p, main, &point);
        let qu = specialize(q, main, &point);
        // leading coefficients must survive the specialization
        if pu.last().map(|c| c == &BigRational::from_integer(0.into())).unwrap_or(true)
            || qu.last().map(|c| c == &BigRational::from_integer(0.into())).unwrap_or(true)
        {
            continue;
        }
        if univariate_gcd_degree(&pu, &qu) == 0 {
            return true;
        }
        return false; // nonzero specialized gcd: inconclusive, run the PRS
    }
    false
}

/// Dense coefficients of `p` in the main variable with all other variables
/// evaluated at `point` (the main slot of `point` is ignored).
fn specialize(p: &Polynomial, main: usize, point: &[BigRational]) -> Vec<BigRational> {
    let deg = p.degree_in(main) as usize;
    let mut out = vec![BigRational::from_integer(0.into()); deg + 1];
    for (m, c) in p.terms() {
        let mut v = c.clone();
        for (i, &e) in m.0.iter().enumerate() {
            if i != main {
                for _ in 0..e {
                    v *= &point[i];
                }
            }
        }
        out[m.0[main] as usize] += v;
    }
    out
}

fn univariate_gcd_degree(a: &[BigRational], b: &[BigRational]) -> usize {
    let trim = |v: &[BigRational]| {
        let mut v = v.to_vec();
        while v.last().map(num_traits::Zero::is_zero).unwrap_or(false) {
            v.pop();
        }
        v
    };
    let mut a = trim(a);
    let mut b = trim(b);
    while !b.is_empty() {
        // a mod b over Q
        while a.len() >= b.len() && !a.is_empty() {
            let f = a.last().unwrap() / b.last().unwrap();
            let shift = a.len() - b.len();
            for (i, bc) in b.iter().enumerate() {
                let t = &f * bc;
                a[shift + i] -= t;
            }
            a = trim(&a);
        }
        std::mem::swap(&mut a, &mut b);
    }
    a.len().saturating_sub(1)
}

/// gcd of the coefficients of `p` viewed as univariate in `main`.
fn content_in(p: &Polynomial, main: usize) -> Polynomial {
    let coeffs = univariate_coeffs(p, main);
    let mut g = Polynomial::zero(p.vars());
    for c in coeffs.into_iter().flatten() {
        g = poly_gcd(&g, &c);
        if g.is_one() {
            break;
        }
    }
    g
}

/// Coefficients of `p` in powers of variable `main`, as polynomials with the
/// main variable zeroed out. Index = power; `None` for absent powers.
fn univariate_coeffs(p: &Polynomial, main: usize) -> Vec<Option<Polynomial>> {
    let deg = p.degree_in(main) as usize;
    let mut out: Vec<Option<Polynomial>> = vec![None; deg + 1];
    for (m, c) in p.terms() {
        let e = m.0[main] as usize;
        let mut exps = m.0.clone();
        exps[main] = 0;
        let t = Polynomial::from_terms(p.vars(), [(exps, c.clone())]);
        out[e] = Some(match out[e].take() {
            None => t,
            Some(acc) => &acc + &t,
        });
    }
    out
}

fn shift_in(p: &Polynomial, main: usize, by: u32) -> Polynomial {
    let terms: Vec<(Vec<u32>, BigRational)> = p
        .terms()
        .map(|(m, c)| {
            let mut exps = m.0.clone();
            exps[main] += by;
            (exps, c.clone())
        })
        .collect();
    Polynomial::from_terms(p.vars(), terms)
}

fn leading_in(p: &Polynomial, main: usize) -> Polynomial {
    let d = p.degree_in(main) as usize;
    univariate_coeffs(p, main)[d]
        .clone()
        .expect("leading coefficient present by construction")
}

/// Pseudo-remainder of `a` by `b` in variable `main` (deg_main a >= deg_main b).
fn pseudo_rem(a: &Polynomial, b: &Polynomial, main: usize) -> Polynomial {
    let db = b.degree_in(main);
    let lb = leading_in(b, main);
    let mut r = a.clone();
    while !r.is_zero() && r.degree_in(main) >= db {
        let dr = r.degree_in(main);
        let lr = leading_in(&r, main);
        // r <- lb*r - lr*x^(dr-db)*b  cancels the leading main-variable term
        r = &(&lb * &r) - &(&shift_in(b, main, dr - db) * &lr);
        debug_assert!(r.is_zero() || r.degree_in(main) < dr);
    }
    r
}

/// lcm normalized monic; `lcm(0, x) = 0`.
pub fn poly_lcm(a: &Polynomial, b: &Polynomial) -> Polynomial {
    if a.is_zero() || b.is_zero() {
        return Polynomial::zero(a.vars());
    }
    let g = poly_gcd(a, b);
    (&a.exact_div(&g) * b).monic()
}
