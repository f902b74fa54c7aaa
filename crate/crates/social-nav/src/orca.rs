//! Reciprocal collision avoidance (ORCA) for holonomic disc agents.
//!
//! Each neighbour induces one half-plane of permitted velocities derived from
//! the truncated velocity obstacle for a chosen time horizon; both agents take
//! half the responsibility for resolving a predicted collision. The returned
//! velocity is the feasible velocity closest to the preferred velocity, found
//! by sequential linear programming over the half-planes intersected with the
//! maximum-speed disc. When the constraints are jointly infeasible (dense
//! crowds), a secondary program minimizes the maximum constraint violation
//! instead, which keeps the solver total.
//!
//! Exact head-on symmetry makes the programs degenerate (both agents would
//! dodge into each other forever). A deterministic tie-break — rotating the
//! preferred velocity by a fixed `+1e-6` radians — picks a consistent passing
//! side while perturbing non-degenerate solutions far below any tolerance used
//! in this crate.

use crate::vec2::Vec2;

/// Matches the epsilon used by reference sequential-LP implementations for
/// parallel-line detection.
const LP_EPSILON: f64 = 1e-5;

/// What one agent can observe of another, plus its own control preferences.
///
/// Only observable fields (`position`, `velocity`, `radius`) of neighbours are
/// read; `preferred_velocity` and `max_speed` matter only for the agent being
/// solved for.
#[derive(Debug, Clone, Copy)]
pub struct OrcaAgentView {
    pub position: Vec2,
    pub velocity: Vec2,
    pub radius: f64,
    /// Velocity the agent would take with no neighbours around.
    pub preferred_velocity: Vec2,
    pub max_speed: f64,
}

/// Solver parameters shared by every agent in a simulation.
#[derive(Debug, Clone, Copy)]
pub struct OrcaParams {
    /// Horizon (s) over which predicted collisions generate constraints.
    pub time_horizon: f64,
    /// Integration step (s); governs the separation constraint once discs
    /// already overlap.
    pub time_step: f64,
    /// Deterministic symmetry tie-break applied to the preferred velocity
    /// (radians, counter-clockwise).
    pub tie_break_rotation: f64,
}

impl Default for OrcaParams {
    fn default() -> Self {
        OrcaParams {
            time_horizon: 2.0,
            time_step: 0.25,
            tie_break_rotation: 1e-6,
        }
    }
}

/// Directed line; the permitted half-plane is to its left:
/// `direction.cross(v - point) >= 0`.
#[derive(Debug, Clone, Copy)]
struct Line {
    point: Vec2,
    direction: Vec2,
}

/// Half-plane of velocities that keep `me` clear of `other` for the horizon,
/// assuming the neighbour takes its half of the avoidance effort.
fn orca_line(me: &OrcaAgentView, other: &OrcaAgentView, params: &OrcaParams) -> Line {
    let rel_pos = other.position - me.position;
    let rel_vel = me.velocity - other.velocity;
    let dist_sq = rel_pos.norm_sq();
    let combined_r = me.radius + other.radius;
    let combined_r_sq = combined_r * combined_r;

    let direction;
    let u;

    if dist_sq > combined_r_sq {
        // No current overlap: constraint comes from the velocity obstacle
        // truncated at the time horizon.
        let inv_horizon = 1.0 / params.time_horizon;
        let w = rel_vel - rel_pos * inv_horizon;
        let w_len_sq = w.norm_sq();
        let dot1 = w.dot(rel_pos);

        if dot1 < 0.0 && dot1 * dot1 > combined_r_sq * w_len_sq {
            // Closest boundary point lies on the cut-off circle.
            let w_len = w_len_sq.sqrt();
            let unit_w = w / w_len;
            direction = Vec2::new(unit_w.y, -unit_w.x);
            u = (combined_r * inv_horizon - w_len) * unit_w;
        } else {
            // Closest boundary point lies on one of the cone legs.
            let leg = (dist_sq - combined_r_sq).sqrt();
            let dir = if rel_pos.cross(w) > 0.0 {
                // Left leg.
                Vec2::new(
                    rel_pos.x * leg - rel_pos.y * combined_r,
                    rel_pos.x * combined_r + rel_pos.y * leg,
                ) / dist_sq
            } else {
                // Right leg.
                -(Vec2::new(
                    rel_pos.x * leg + rel_pos.y * combined_r,
                    -rel_pos.x * combined_r + rel_pos.y * leg,
                ) / dist_sq)
            };
            direction = dir;
            u = rel_vel.dot(dir) * dir - rel_vel;
        }
    } else {
        // Discs already overlap: require a relative velocity that separates
        // them within one time step.
        let inv_dt = 1.0 / params.time_step;
        let w = rel_vel - rel_pos * inv_dt;
        let w_len = w.norm();
        let unit_w = if w_len > 1e-12 {
            w / w_len
        } else if dist_sq > 0.0 {
            // Degenerate: relative velocity exactly matches the separation
            // requirement direction; push straight apart.
            -rel_pos.normalized()
        } else {
            // Coincident centers; any fixed direction is as good as another.
            Vec2::new(1.0, 0.0)
        };
        direction = Vec2::new(unit_w.y, -unit_w.x);
        u = (combined_r * inv_dt - w_len) * unit_w;
    }

    Line {
        point: me.velocity + 0.5 * u,
        direction,
    }
}

/// Optimize along line `line_no` within the speed disc and the half-planes of
/// all earlier lines. Returns false when that feasible segment is empty.
fn linear_program_1(
    lines: &[Line],
    line_no: usize,
    radius: f64,
    opt_v: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> bool {
    let line = lines[line_no];
    let dot = line.point.dot(line.direction);
    let discriminant = dot * dot + radius * radius - line.point.norm_sq();
    if discriminant < 0.0 {
        // Max-speed disc misses the line entirely.
        return false;
    }
    let sqrt_disc = discriminant.sqrt();
    let mut t_left = -dot - sqrt_disc;
    let mut t_right = -dot + sqrt_disc;

    for prev in lines.iter().take(line_no) {
        let denominator = line.direction.cross(prev.direction);
        let numerator = prev.direction.cross(line.point - prev.point);
        if denominator.abs() <= LP_EPSILON {
            // Parallel lines: either fully inside or fully outside.
            if numerator < 0.0 {
                return false;
            }
            continue;
        }
        let t = numerator / denominator;
        if denominator >= 0.0 {
            t_right = t_right.min(t);
        } else {
            t_left = t_left.max(t);
        }
        if t_left > t_right {
            return false;
        }
    }

    let t = if direction_opt {
        if opt_v.dot(line.direction) > 0.0 {
            t_right
        } else {
            t_left
        }
    } else {
        line.direction.dot(opt_v - line.point).clamp(t_left, t_right)
    };

    *result = line.point + t * line.direction;
    true
}

/// Sequentially insert half-planes, projecting the current optimum whenever a
/// new one is violated. Returns `lines.len()` on success or the index of the
/// first line for which the program became infeasible.
fn linear_program_2(
    lines: &[Line],
    radius: f64,
    opt_v: Vec2,
    direction_opt: bool,
    result: &mut Vec2,
) -> usize {
    *result = if direction_opt {
        // `opt_v` is a unit direction: optimize to the disc boundary.
        opt_v * radius
    } else if opt_v.norm_sq() > radius * radius {
        opt_v.normalized() * radius
    } else {
        opt_v
    };

    for (i, line) in lines.iter().enumerate() {
        if line.direction.cross(line.point - *result) > 0.0 {
            let saved = *result;
            if !linear_program_1(lines, i, radius, opt_v, direction_opt, result) {
                *result = saved;
                return i;
            }
        }
    }
    lines.len()
}

/// Infeasible case: minimize the maximum half-plane violation (equivalent to a
/// 3-D linear program), keeping the result inside the speed disc.
fn linear_program_3(lines: &[Line], begin_line: usize, radius: f64, result: &mut Vec2) {
    let mut distance = 0.0;

    for i in begin_line..lines.len() {
        if lines[i].direction.cross(lines[i].point - *result) > distance {
            // Project earlier constraints onto the boundary of violation
            // `distance` from line i.
            let mut proj_lines: Vec<Line> = Vec::with_capacity(i);
            for j in 0..i {
                let determinant = lines[i].direction.cross(lines[j].direction);
                let point = if determinant.abs() <= LP_EPSILON {
                    if lines[i].direction.dot(lines[j].direction) > 0.0 {
                        // Same direction: line j is redundant here.
                        continue;
                    }
                    0.5 * (lines[i].point + lines[j].point)
                } else {
                    lines[i].point
                        + (lines[j].direction.cross(lines[i].point - lines[j].point)
                            / determinant)
                            * lines[i].direction
                };
                proj_lines.push(Line {
                    point,
                    direction: (lines[j].direction - lines[i].direction).normalized(),
                });
            }

            let saved = *result;
            if linear_program_2(
                &proj_lines,
                radius,
                Vec2::new(-lines[i].direction.y, lines[i].direction.x),
                true,
                result,
            ) < proj_lines.len()
            {
                // Numerically should not happen; keep the previous best.
                *result = saved;
            }
            distance = lines[i].direction.cross(lines[i].point - *result);
        }
    }
}

/// New velocity for `me` given the observable states of `neighbours`.
///
/// The result always satisfies `|v| <= me.max_speed` (up to rounding); with no
/// neighbours it is the preferred velocity clamped to the speed disc (modulo
/// the tie-break rotation).
pub fn compute_orca_velocity(
    me: &OrcaAgentView,
    neighbours: &[OrcaAgentView],
    params: &OrcaParams,
) -> Vec2 {
    let pref = me.preferred_velocity.rotated(params.tie_break_rotation);
    let lines: Vec<Line> = neighbours
        .iter()
        .map(|other| orca_line(me, other, params))
        .collect();

    let mut result = Vec2::ZERO;
    let fail = linear_program_2(&lines, me.max_speed, pref, false, &mut result);
    if fail < lines.len() {
        linear_program_3(&lines, fail, me.max_speed, &mut result);
    }
    result
}

/// Conservative variant used as the safety fallback: every neighbour's radius
/// is inflated by `radius_inflation` before solving, so the commanded velocity
/// keeps extra clearance. Inflation may put the solver into its overlap branch
/// or make the program infeasible; both remain well-defined.
pub fn cautious_orca_velocity(
    me: &OrcaAgentView,
    neighbours: &[OrcaAgentView],
    params: &OrcaParams,
    radius_inflation: f64,
) -> Vec2 {
    let inflated: Vec<OrcaAgentView> = neighbours
        .iter()
        .map(|n| OrcaAgentView {
            radius: n.radius * radius_inflation,
            ..*n
        })
        .collect();
    compute_orca_velocity(me, &inflated, params)
}
