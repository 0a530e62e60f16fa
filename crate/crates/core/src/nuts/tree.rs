//! Leapfrog integration and the multinomial no-U-turn transition.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::LogDensity;
use crate::special::log_sum_exp;

/// Energy error beyond which a trajectory is declared divergent.
pub const MAX_DELTA_H: f64 = 1000.0;

/// Position, momentum and the cached log-density and gradient at the position.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl PhasePoint {
    /// Evaluates the target at `q` with zero momentum.
    pub fn new<L: LogDensity + ?Sized>(target: &L, q: Vec<f64>) -> Self {
        let mut grad = vec![0.0; q.len()];
        let log_density = sanitize(target.log_density_and_grad(&q, &mut grad), &grad);
        let p = vec![0.0; q.len()];
        Self { q, p, log_density, grad }
    }

    pub fn kinetic(&self, inv_mass: &[f64]) -> f64 {
        0.5 * self.p.iter().zip(inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
    }

    /// `H = −log π(q) + ½ pᵀM⁻¹p`; NaN becomes `+∞`.
    pub fn hamiltonian(&self, inv_mass: &[f64]) -> f64 {
        let h = -self.log_density + self.kinetic(inv_mass);
        if h.is_nan() {
            f64::INFINITY
        } else {
            h
        }
    }

    /// Velocity `M⁻¹p`.
    fn velocity(&self, inv_mass: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_mass).map(|(p, m)| p * m).collect()
    }

    pub fn resample_momentum<R: Rng + ?Sized>(&mut self, inv_mass: &[f64], rng: &mut R) {
        for (p, m) in self.p.iter_mut().zip(inv_mass) {
            let z: f64 = rng.sample(StandardNormal);
            *p = z / m.sqrt();
        }
    }
}

fn sanitize(log_density: f64, grad: &[f64]) -> f64 {
    if log_density.is_nan() || grad.iter().any(|g| !g.is_finite()) {
        f64::NEG_INFINITY
    } else {
        log_density
    }
}

/// One leapfrog step of size `eps` (negative integrates backwards):
/// half kick, drift through `M⁻¹`, half kick. A non-finite gradient sets
/// the log-density to `−∞`, which the caller sees as a divergence.
pub fn leapfrog<L: LogDensity + ?Sized>(target: &L, z: &mut PhasePoint, eps: f64, inv_mass: &[f64]) {
    for (p, g) in z.p.iter_mut().zip(&z.grad) {
        *p += 0.5 * eps * g;
    }
    for ((q, p), m) in z.q.iter_mut().zip(&z.p).zip(inv_mass) {
        *q += eps * m * p;
    }
    z.log_density = sanitize(target.log_density_and_grad(&z.q, &mut z.grad), &z.grad);
    for (p, g) in z.p.iter_mut().zip(&z.grad) {
        *p += 0.5 * eps * g;
    }
}

/// Diagnostics of one transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionStats {
    /// Mean Metropolis acceptance probability over the trajectory.
    pub accept_stat: f64,
    pub tree_depth: usize,
    pub n_leapfrog: usize,
    pub divergent: bool,
    pub energy: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn add_assign(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

/// No-U-turn check on a trajectory segment with summed momentum `rho`.
fn no_u_turn(v_minus: &[f64], v_plus: &[f64], rho: &[f64]) -> bool {
    dot(v_plus, rho) > 0.0 && dot(v_minus, rho) > 0.0
}

/// Momenta and velocities at both ends of a subtree, ordered along the
/// direction of integration.
struct Ends {
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
    v_beg: Vec<f64>,
    v_end: Vec<f64>,
}

struct Builder<'a, L: ?Sized, R: ?Sized> {
    target: &'a L,
    inv_mass: &'a [f64],
    eps: f64,
    h0: f64,
    rng: &'a mut R,
    n_leapfrog: usize,
    sum_metro_prob: f64,
    divergent: bool,
}

impl<L: LogDensity + ?Sized, R: Rng + ?Sized> Builder<'_, L, R> {
    /// Extends the trajectory from `z` by `2^depth` steps. On return `z` is
    /// the new outer end, `proposal` the subtree's multinomial sample, `rho`
    /// has the subtree momenta added and `log_sum_weight` its weights.
    fn build(
        &mut self,
        depth: usize,
        z: &mut PhasePoint,
        proposal: &mut PhasePoint,
        rho: &mut [f64],
        log_sum_weight: &mut f64,
        sign: f64,
    ) -> Option<Ends> {
        if depth == 0 {
            leapfrog(self.target, z, sign * self.eps, self.inv_mass);
            self.n_leapfrog += 1;
            let h = z.hamiltonian(self.inv_mass);
            if h - self.h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            let log_w = self.h0 - h;
            *log_sum_weight = log_sum_exp(*log_sum_weight, log_w);
            self.sum_metro_prob += if log_w > 0.0 { 1.0 } else { log_w.exp() };
            proposal.clone_from(z);
            add_assign(rho, &z.p);
            if self.divergent {
                return None;
            }
            let v = z.velocity(self.inv_mass);
            return Some(Ends { p_beg: z.p.clone(), p_end: z.p.clone(), v_beg: v.clone(), v_end: v });
        }

        let d = z.q.len();
        let mut rho_init = vec![0.0; d];
        let mut lsw_init = f64::NEG_INFINITY;
        let init = self.build(depth - 1, z, proposal, &mut rho_init, &mut lsw_init, sign)?;

        let mut proposal_final = z.clone();
        let mut rho_final = vec![0.0; d];
        let mut lsw_final = f64::NEG_INFINITY;
        let fin = self.build(depth - 1, z, &mut proposal_final, &mut rho_final, &mut lsw_final, sign)?;

        let lsw_subtree = log_sum_exp(lsw_init, lsw_final);
        *log_sum_weight = log_sum_exp(*log_sum_weight, lsw_subtree);
        if lsw_final > lsw_subtree || self.rng.random::<f64>() < (lsw_final - lsw_subtree).exp() {
            std::mem::swap(proposal, &mut proposal_final);
        }

        let rho_subtree = add(&rho_init, &rho_final);
        add_assign(rho, &rho_subtree);
        let persist = no_u_turn(&init.v_beg, &fin.v_end, &rho_subtree)
            && no_u_turn(&init.v_beg, &fin.v_beg, &add(&rho_init, &fin.p_beg))
            && no_u_turn(&init.v_end, &fin.v_end, &add(&rho_final, &init.p_end));
        if persist {
            Some(Ends { p_beg: init.p_beg, p_end: fin.p_end, v_beg: init.v_beg, v_end: fin.v_end })
        } else {
            None
        }
    }
}

/// One NUTS transition from `current`, which must already hold a finite
/// log-density and its gradient. Momentum is resampled, the trajectory is
/// doubled in random directions until it turns back on itself, diverges or
/// reaches `2^max_treedepth − 1` steps (at least one step is always taken),
/// and the new state is drawn from the trajectory with weights
/// `exp(−H)` using biased progressive sampling.
pub fn transition<L, R>(
    target: &L,
    current: &mut PhasePoint,
    eps: f64,
    inv_mass: &[f64],
    max_treedepth: usize,
    rng: &mut R,
) -> TransitionStats
where
    L: LogDensity + ?Sized,
    R: Rng + ?Sized,
{
    current.resample_momentum(inv_mass, rng);
    let h0 = current.hamiltonian(inv_mass);

    let v0 = current.velocity(inv_mass);
    let mut z_fwd = current.clone();
    let mut z_bck = current.clone();
    let mut sample = current.clone();
    // outer and inner ends of the forward and backward halves
    let (mut p_fwd_fwd, mut p_fwd_bck) = (current.p.clone(), current.p.clone());
    let (mut p_bck_fwd, mut p_bck_bck) = (current.p.clone(), current.p.clone());
    let (mut v_fwd_fwd, mut v_fwd_bck) = (v0.clone(), v0.clone());
    let (mut v_bck_fwd, mut v_bck_bck) = (v0.clone(), v0);
    let mut rho = current.p.clone();
    let mut log_sum_weight = 0.0;
    let d = current.q.len();

    let mut builder = Builder {
        target,
        inv_mass,
        eps,
        h0,
        rng,
        n_leapfrog: 0,
        sum_metro_prob: 0.0,
        divergent: false,
    };
    let mut depth = 0;
    loop {
        let mut rho_fwd = vec![0.0; d];
        let mut rho_bck = vec![0.0; d];
        let mut lsw_subtree = f64::NEG_INFINITY;
        let mut proposal = current.clone();
        let ends = if builder.rng.random::<f64>() > 0.5 {
            rho_bck.clone_from(&rho);
            p_bck_fwd.clone_from(&p_fwd_bck);
            v_bck_fwd.clone_from(&v_fwd_bck);
            let ends = builder.build(depth, &mut z_fwd, &mut proposal, &mut rho_fwd, &mut lsw_subtree, 1.0);
            if let Some(e) = &ends {
                p_fwd_bck.clone_from(&e.p_beg);
                p_fwd_fwd.clone_from(&e.p_end);
                v_fwd_bck.clone_from(&e.v_beg);
                v_fwd_fwd.clone_from(&e.v_end);
            }
            ends
        } else {
            rho_fwd.clone_from(&rho);
            p_fwd_bck.clone_from(&p_bck_fwd);
            v_fwd_bck.clone_from(&v_bck_fwd);
            let ends = builder.build(depth, &mut z_bck, &mut proposal, &mut rho_bck, &mut lsw_subtree, -1.0);
            if let Some(e) = &ends {
                p_bck_fwd.clone_from(&e.p_beg);
                p_bck_bck.clone_from(&e.p_end);
                v_bck_fwd.clone_from(&e.v_beg);
                v_bck_bck.clone_from(&e.v_end);
            }
            ends
        };
        if ends.is_none() {
            break;
        }
        depth += 1;

        if lsw_subtree > log_sum_weight
            || builder.rng.random::<f64>() < (lsw_subtree - log_sum_weight).exp()
        {
            sample = proposal;
        }
        log_sum_weight = log_sum_exp(log_sum_weight, lsw_subtree);

        rho = add(&rho_bck, &rho_fwd);
        let persist = no_u_turn(&v_bck_bck, &v_fwd_fwd, &rho)
            && no_u_turn(&v_bck_bck, &v_fwd_bck, &add(&rho_bck, &p_fwd_bck))
            && no_u_turn(&v_bck_fwd, &v_fwd_fwd, &add(&rho_fwd, &p_bck_fwd));
        if !persist || depth >= max_treedepth {
            break;
        }
    }

    let stats = TransitionStats {
        accept_stat: builder.sum_metro_prob / builder.n_leapfrog as f64,
        tree_depth: depth,
        n_leapfrog: builder.n_leapfrog,
        divergent: builder.divergent,
        energy: sample.hamiltonian(inv_mass),
    };
    *current = sample;
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    struct StdNormal(usize);

    impl LogDensity for StdNormal {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density(&self, q: &[f64]) -> f64 {
            -0.5 * dot(q, q)
        }
        fn log_density_and_grad(&self, q: &[f64], grad: &mut [f64]) -> f64 {
            for (g, x) in grad.iter_mut().zip(q) {
                *g = -x;
            }
            -0.5 * dot(q, q)
        }
    }

    #[test]
    fn leapfrog_is_reversible() {
        let t = StdNormal(3);
        let inv_mass = [1.0, 0.5, 2.0];
        let mut z = PhasePoint::new(&t, vec![0.3, -1.2, 0.8]);
        z.p = vec![0.7, 0.1, -0.4];
        let start = z.clone();
        for _ in 0..10 {
            leapfrog(&t, &mut z, 0.2, &inv_mass);
        }
        z.p.iter_mut().for_each(|p| *p = -*p);
        for _ in 0..10 {
            leapfrog(&t, &mut z, 0.2, &inv_mass);
        }
        z.p.iter_mut().for_each(|p| *p = -*p);
        for (a, b) in z.q.iter().zip(&start.q).chain(z.p.iter().zip(&start.p)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_drift_is_small() {
        let t = StdNormal(1);
        let mut z = PhasePoint::new(&t, vec![1.0]);
        z.p = vec![0.5];
        let h0 = z.hamiltonian(&[1.0]);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            leapfrog(&t, &mut z, 0.1, &[1.0]);
            worst = worst.max((z.hamiltonian(&[1.0]) - h0).abs());
        }
        assert!(worst < 1e-2);
    }

    #[test]
    fn small_step_drift_is_first_order() {
        let t = StdNormal(2);
        let inv_mass = [0.5, 3.0];
        for &eps in &[1e-3, 1e-4] {
            let mut z = PhasePoint::new(&t, vec![0.4, -0.2]);
            z.p = vec![1.0, -2.0];
            let q0 = z.q.clone();
            let p0 = z.p.clone();
            leapfrog(&t, &mut z, eps, &inv_mass);
            for j in 0..2 {
                let linear = eps * inv_mass[j] * p0[j];
                assert!((z.q[j] - q0[j] - linear).abs() < 2.0 * eps * eps);
            }
        }
    }

    #[test]
    fn leapfrog_map_preserves_volume() {
        // Jacobian of (q, p) -> step(q, p) on a quadratic target, by central differences
        let t = StdNormal(1);
        let step = |q: f64, p: f64| {
            let mut z = PhasePoint::new(&t, vec![q]);
            z.p = vec![p];
            leapfrog(&t, &mut z, 0.3, &[1.7]);
            (z.q[0], z.p[0])
        };
        let h = 1e-5;
        let (q, p) = (0.4, -0.9);
        let (a1, b1) = step(q + h, p);
        let (a0, b0) = step(q - h, p);
        let (c1, d1) = step(q, p + h);
        let (c0, d0) = step(q, p - h);
        let j = [[(a1 - a0) / (2.0 * h), (c1 - c0) / (2.0 * h)], [(b1 - b0) / (2.0 * h), (d1 - d0) / (2.0 * h)]];
        let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        assert!((det - 1.0).abs() < 1e-10);
    }

    #[test]
    fn depth_zero_is_a_metropolis_step() {
        let t = StdNormal(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut z = PhasePoint::new(&t, vec![0.5, -0.5]);
        for _ in 0..200 {
            let stats = transition(&t, &mut z, 0.9, &[1.0, 1.0], 0, &mut rng);
            assert_eq!(stats.n_leapfrog, 1);
            assert_eq!(stats.tree_depth, 1);
            assert!((0.0..=1.0).contains(&stats.accept_stat));
        }
    }

    #[test]
    fn huge_step_is_divergent() {
        let t = StdNormal(2);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut z = PhasePoint::new(&t, vec![1.0, 1.0]);
        let start = z.q.clone();
        let stats = transition(&t, &mut z, 1e3, &[1.0, 1.0], 10, &mut rng);
        assert!(stats.divergent);
        assert_eq!(z.q, start);
    }
}
