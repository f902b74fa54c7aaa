//! Scratch: single-neighbor half-plane oracle v2 (closed-form geometry) plus
//! grid LP check; measures deviation of the library solver from the oracle.
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use social_nav::orca::{compute_orca_velocity, OrcaAgentView, OrcaParams};
use social_nav::vec2::Vec2;

struct HalfPlane {
    point: Vec2,
    normal: Vec2, // permitted side: (v - point) . normal >= 0
}

/// Independent construction of the single-neighbour avoidance half-plane:
/// geometric formulas (tangent-rotation legs, radial cap projections) rather
/// than the solver's vector algebra.
fn oracle_half_plane(me: &OrcaAgentView, other: &OrcaAgentView, params: &OrcaParams) -> HalfPlane {
    let p = other.position - me.position;
    let q = me.velocity - other.velocity; // relative velocity
    let dist = p.norm();
    let r = me.radius + other.radius;
    let (foot, normal);
    if dist > r {
        let c = p / params.time_horizon; // cut-off cap centre
        let cap_r = r / params.time_horizon;
        let w = q - c;
        let wn = w.norm();
        let arc = wn > 0.0 && p.dot(w) < -r * wn;
        if arc {
            // Radial projection onto the cap circle.
            let out = w / wn;
            foot = c + out * cap_r;
            normal = out;
        } else {
            // Tangent leg through the origin, picked by the side of `w`.
            let beta = (r / dist).asin();
            let side = if p.cross(w) > 0.0 { 1.0 } else { -1.0 };
            let leg_dir = (p / dist).rotated(side * beta);
            let along = q.dot(leg_dir);
            foot = leg_dir * along;
            // Outward = away from the obstacle side of the leg.
            let perp = q - foot;
            normal = if perp.norm() > 0.0 {
                perp.normalized() * if inside_cone(p, r, q) { -1.0 } else { 1.0 }
            } else {
                (p / dist).rotated(side * (beta + std::f64::consts::FRAC_PI_2)).normalized()
            };
        }
    } else {
        // Already overlapping: separate within one time step.
        let c = p / params.time_step;
        let cap_r = r / params.time_step;
        let w = q - c;
        let wn = w.norm();
        let out = if wn > 1e-12 {
            w / wn
        } else if dist > 0.0 {
            -(p / dist)
        } else {
            Vec2::new(1.0, 0.0)
        };
        foot = c + out * cap_r;
        normal = out;
    }
    let u = foot - q;
    HalfPlane { point: me.velocity + u * 0.5, normal }
}

/// Is relative velocity q strictly inside the (untruncated) collision cone?
fn inside_cone(p: Vec2, r: f64, q: Vec2) -> bool {
    let dist = p.norm();
    if dist <= r {
        return true;
    }
    let qn = q.norm();
    if qn == 0.0 {
        return false;
    }
    // Angle between q and p below the tangent half-angle.
    let cos_half = (1.0 - (r / dist) * (r / dist)).sqrt();
    q.dot(p) > cos_half * qn * dist
}

fn main() {
    let params = OrcaParams::default();
    let mut rng = ChaCha12Rng::seed_from_u64(4100);
    let h = 0.05;
    let mut max_dev = 0.0f64;
    let mut infeasible_count = 0;
    let mut overlap_count = 0;
    let mut obj_violations = 0;
    let mut max_excess = 0.0f64;
    let mut max_viol_excess = 0.0f64;
    for used in 0..2000 {
        let r_me = rng.gen_range(0.2..0.5);
        let r_other = rng.gen_range(0.2..0.5);
        let theta = rng.gen_range(0.0..std::f64::consts::TAU);
        let dist = rng.gen_range(0.25..5.0);
        let other_pos = Vec2::new(theta.cos() * dist, theta.sin() * dist);
        let vmax = rng.gen_range(0.8..1.5);
        let mut rv = |rng: &mut ChaCha12Rng| Vec2::new(rng.gen_range(-1.2..1.2), rng.gen_range(-1.2..1.2));
        let me = OrcaAgentView {
            position: Vec2::ZERO,
            velocity: rv(&mut rng),
            radius: r_me,
            preferred_velocity: rv(&mut rng),
            max_speed: vmax,
        };
        let other = OrcaAgentView {
            position: other_pos,
            velocity: rv(&mut rng),
            radius: r_other,
            preferred_velocity: Vec2::ZERO,
            max_speed: vmax,
        };
        if (other.position - me.position).norm() <= r_me + r_other {
            overlap_count += 1;
        }
        let v_lib = compute_orca_velocity(&me, std::slice::from_ref(&other), &params);
        let hp = oracle_half_plane(&me, &other, &params);
        let pref = me.preferred_velocity.rotated(params.tie_break_rotation);

        let cells = (2.0 * vmax / h).ceil() as i64;
        let mut candidates: Vec<Vec2> = Vec::new();
        for iy in 0..=cells {
            for ix in 0..=cells {
                candidates.push(Vec2::new(-vmax + ix as f64 * h, -vmax + iy as f64 * h));
            }
        }
        // Boundary completion at the same resolution: the speed circle, the
        // constraint line, their intersection corners, and the preference.
        let arc_steps = (std::f64::consts::TAU * vmax / h).ceil() as i64;
        for i in 0..arc_steps {
            let a = std::f64::consts::TAU * i as f64 / arc_steps as f64;
            candidates.push(Vec2::new(vmax * a.cos(), vmax * a.sin()));
        }
        let tangent = Vec2::new(-hp.normal.y, hp.normal.x);
        let line_steps = (4.0 * vmax / h).ceil() as i64;
        for i in -line_steps..=line_steps {
            candidates.push(hp.point + tangent * (i as f64 * h));
        }
        // Exact line / circle corners from the quadratic.
        let proj = hp.point.dot(tangent);
        let off = hp.point - tangent * proj;
        let disc = vmax * vmax - off.norm_sq();
        if disc >= 0.0 {
            let sq = disc.sqrt();
            candidates.push(off + tangent * sq);
            candidates.push(off - tangent * sq);
        }
        candidates.push(pref);
        let mut best_feasible: Option<(f64, Vec2)> = None;
        let mut least_violation: Option<(f64, f64, Vec2)> = None;
        for v in candidates {
            if v.norm() > vmax + 1e-12 {
                continue;
            }
            let margin = (v - hp.point).dot(hp.normal);
            let dp = (v - pref).norm();
            if margin >= -1e-12 {
                if best_feasible.map_or(true, |(bd, _)| dp < bd) {
                    best_feasible = Some((dp, v));
                }
            } else if least_violation.map_or(true, |(bv, bd, _)| (-margin, dp) < (bv, bd)) {
                least_violation = Some((-margin, dp, v));
            }
        }
        let (v_grid, feasible) = match best_feasible {
            Some((_, v)) => (v, true),
            None => {
                infeasible_count += 1;
                (least_violation.unwrap().2, false)
            }
        };
        // Exact directional checks.
        if feasible {
            let lib_margin = (v_lib - hp.point).dot(hp.normal);
            if lib_margin < -1e-9 {
                println!("geom {used}: lib constraint violation {lib_margin:.2e}");
                obj_violations += 1;
            }
            if (v_lib - pref).norm() > (v_grid - pref).norm() + 1e-9 {
                println!("geom {used}: lib objective {:.6} worse than grid {:.6}",
                    (v_lib - pref).norm(), (v_grid - pref).norm());
                obj_violations += 1;
            }
            max_excess = max_excess.max((v_grid - pref).norm() - (v_lib - pref).norm());
        } else {
            let lib_viol = -((v_lib - hp.point).dot(hp.normal)).min(0.0);
            let grid_viol = -((v_grid - hp.point).dot(hp.normal)).min(0.0);
            if lib_viol > grid_viol + 1e-9 {
                println!("geom {used}: lib violation {lib_viol:.6} worse than grid {grid_viol:.6}");
                obj_violations += 1;
            }
            max_viol_excess = max_viol_excess.max(grid_viol - lib_viol);
        }
        let dev = (v_lib - v_grid).norm();
        if dev > max_dev { max_dev = dev; }
    }
    println!("overlaps {overlap_count} infeasible {infeasible_count} max_dev {max_dev:.4} obj_violations {obj_violations} max_excess {max_excess:.4} max_viol_excess {max_viol_excess:.4} (h = {h})");
}
