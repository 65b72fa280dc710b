//! Agent-by-agent simulation with explicit delay lines.

use crate::error::{Error, Result};
use crate::matcore::Matrix;
use crate::synthesis::Mode;

use super::delay::DelayLine;
use super::trace::{SimulationTrace, TraceDims, TraceStep};
use super::{mode_requires_observer, AgentPlant, Scenario, DIVERGENCE_LIMIT};

/// Which coordinates the controller runs in.
///
/// `Transformed` delays the internal-model (and observer) state when it is
/// used; `Untransformed` instead delays the virtual error fed into it, so its
/// controller state equals the transformed one shifted by `r_com` steps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LawForm {
    #[default]
    Transformed,
    Untransformed,
}

pub fn simulate_state_feedback(s: &Scenario) -> Result<SimulationTrace> {
    simulate(s, Mode::State, LawForm::Transformed)
}

pub fn simulate_output_feedback(s: &Scenario) -> Result<SimulationTrace> {
    simulate(s, Mode::Output, LawForm::Transformed)
}

pub fn simulate(s: &Scenario, mode: Mode, form: LawForm) -> Result<SimulationTrace> {
    s.validate()?;
    mode_requires_observer(mode, &s.gains)?;
    Agentwise::new(s, mode, form)?.run()
}

struct Agentwise<'a> {
    s: &'a Scenario,
    mode: Mode,
    form: LawForm,
    plants: Vec<AgentPlant>,
    /// Leader weight `a_i0` and follower neighbours `(j, a_ij)` (0-based j).
    leader: Vec<f64>,
    neighbors: Vec<Vec<(usize, f64)>>,
    lc: Matrix,
    l: Matrix,
}

impl<'a> Agentwise<'a> {
    fn new(s: &'a Scenario, mode: Mode, form: LawForm) -> Result<Self> {
        let n_agents = s.n_agents();
        let leader = s.graph.leader_weights();
        let neighbors = (1..=n_agents)
            .map(|i| {
                s.graph
                    .neighbors(i)
                    .filter(|&(j, _)| j != 0)
                    .map(|(j, w)| (j - 1, w))
                    .collect()
            })
            .collect();
        let (l, lc) = match mode {
            Mode::Output => {
                let l = s.gains.observer()?.clone();
                if l.shape() != (s.plant.n(), s.plant.p()) {
                    return Err(Error::dim("observer gain L", format!("{:?}", (s.plant.n(), s.plant.p())), format!("{:?}", l.shape())));
                }
                (l.clone(), &l * &s.plant.c)
            }
            Mode::State => (Matrix::zeros(0, 0), Matrix::zeros(0, 0)),
        };
        Ok(Agentwise {
            s,
            mode,
            form,
            plants: s.agent_plants(),
            leader,
            neighbors,
            lc,
            l,
        })
    }

    /// `Σ_j a_ij (w_i − w_j)` with the leader's value taken as zero.
    fn relative(&self, i: usize, w: &[Vec<f64>]) -> Vec<f64> {
        let mut acc = scaled(&w[i], self.leader[i]);
        for &(j, a) in &self.neighbors[i] {
            for (k, slot) in acc.iter_mut().enumerate() {
                *slot += a * (w[i][k] - w[j][k]);
            }
        }
        acc
    }

    fn run(&self) -> Result<SimulationTrace> {
        let s = self.s;
        let n_agents = s.n_agents();
        let (g, im) = (&s.gains, &s.im);
        let (r_con, r_com) = (s.delays.r_con, s.delays.r_com);
        let output = self.mode == Mode::Output;
        let dims = TraceDims {
            n_agents,
            n: s.plant.n(),
            m: s.plant.m(),
            p: s.plant.p(),
            q: s.plant.q(),
            nz: im.nz(),
            has_xi: output,
        };
        let mut trace = SimulationTrace::new(dims);
        if s.horizon == 0 {
            return Ok(trace);
        }

        let init = s.initial_state();
        let mut v = s.exo.v0.clone();
        let mut x = init.x;
        let mut z = init.z;
        let mut xi = if output { init.xi } else { Vec::new() };
        check_state(0, &[&x, &z, &xi])?;

        // Transformed laws read delayed copies of x (state) or z and η (both).
        let mut x_line: Vec<DelayLine<Vec<f64>>> = (0..n_agents).map(|_| DelayLine::new(r_com)).collect();
        let mut z_line: Vec<DelayLine<Vec<f64>>> = (0..n_agents).map(|_| DelayLine::new(r_com)).collect();
        let mut eta_line: Vec<DelayLine<Vec<f64>>> = (0..n_agents).map(|_| DelayLine::new(r_com)).collect();
        let mut u_line: Vec<DelayLine<Vec<f64>>> = (0..n_agents).map(|_| DelayLine::new(r_con)).collect();
        // The untransformed observer sees the input delayed by the whole loop.
        let mut u_obs_line: Vec<DelayLine<Vec<f64>>> = (0..n_agents).map(|_| DelayLine::new(r_con + r_com)).collect();
        // Untransformed laws instead delay the virtual error.
        let mut ev_line: Vec<DelayLine<Vec<f64>>> = (0..n_agents).map(|_| DelayLine::new(r_com)).collect();

        let neg_fv = |v: &[f64]| scaled(&s.exo.f.mul_vec(v), -1.0);

        for t in 0..s.horizon {
            let y: Vec<Vec<f64>> = (0..n_agents).map(|i| self.plants[i].c.mul_vec(&x[i])).collect();
            let y0 = neg_fv(&v);
            let e: Vec<Vec<f64>> = y.iter().map(|yi| sub(yi, &y0)).collect();
            // e_vi = Σ a_ij (y_i − y_j), y_0 = −F v
            let ev: Vec<Vec<f64>> = (0..n_agents)
                .map(|i| {
                    let mut acc = scaled(&sub(&y[i], &y0), self.leader[i]);
                    for &(j, a) in &self.neighbors[i] {
                        axpy(&mut acc, a, &sub(&y[i], &y[j]));
                    }
                    acc
                })
                .collect();

            let u: Vec<Vec<f64>> = match (self.mode, self.form) {
                (Mode::State, _) => {
                    for (line, xi_) in x_line.iter_mut().zip(&x) {
                        line.push(xi_.clone());
                    }
                    let xd: Vec<Vec<f64>> = x_line.iter().map(|l| l.delayed().clone()).collect();
                    (0..n_agents)
                        .map(|i| {
                            let eta = self.relative(i, &xd);
                            let zc = match self.form {
                                LawForm::Transformed => {
                                    z_line[i].push(z[i].clone());
                                    z_line[i].delayed().clone()
                                }
                                LawForm::Untransformed => z[i].clone(),
                            };
                            add(&g.k_x.mul_vec(&eta), &g.k_z.mul_vec(&zc))
                        })
                        .collect()
                }
                (Mode::Output, LawForm::Transformed) => (0..n_agents)
                    .map(|i| {
                        let eta = self.relative(i, &xi);
                        z_line[i].push(z[i].clone());
                        eta_line[i].push(eta);
                        add(&g.k_1.mul_vec(z_line[i].delayed()), &g.k_2.mul_vec(eta_line[i].delayed()))
                    })
                    .collect(),
                (Mode::Output, LawForm::Untransformed) => (0..n_agents)
                    .map(|i| {
                        let eta = self.relative(i, &xi);
                        add(&g.k_1.mul_vec(&z[i]), &g.k_2.mul_vec(&eta))
                    })
                    .collect(),
            };
            for ((line, obs), ui) in u_line.iter_mut().zip(&mut u_obs_line).zip(&u) {
                line.push(ui.clone());
                obs.push(ui.clone());
            }
            for (line, evi) in ev_line.iter_mut().zip(&ev) {
                line.push(evi.clone());
            }

            trace.steps.push(TraceStep {
                t,
                v: v.clone(),
                x: x.clone(),
                z: z.clone(),
                xi: xi.clone(),
                u: u.clone(),
                y,
                e,
                ev: ev.clone(),
            });
            if t + 1 == s.horizon {
                break;
            }

            // Advance every state to t + 1.
            let x_next: Vec<Vec<f64>> = (0..n_agents)
                .map(|i| {
                    let pl = &self.plants[i];
                    let mut nx = pl.a.mul_vec(&x[i]);
                    axpy(&mut nx, 1.0, &pl.b.mul_vec(u_line[i].delayed()));
                    axpy(&mut nx, 1.0, &pl.e.mul_vec(&v));
                    nx
                })
                .collect();
            let hold = self.form == LawForm::Untransformed && t < r_com;
            let z_next: Vec<Vec<f64>> = (0..n_agents)
                .map(|i| {
                    if hold {
                        return z[i].clone();
                    }
                    let drive = match self.form {
                        LawForm::Transformed => &ev[i],
                        LawForm::Untransformed => ev_line[i].delayed(),
                    };
                    add(&im.g1.mul_vec(&z[i]), &im.g2.mul_vec(drive))
                })
                .collect();
            let xi_next: Vec<Vec<f64>> = if output {
                (0..n_agents)
                    .map(|i| {
                        if hold {
                            return xi[i].clone();
                        }
                        let eta = self.relative(i, &xi);
                        let (drive, u_obs) = match self.form {
                            LawForm::Transformed => (&ev[i], u_line[i].delayed()),
                            LawForm::Untransformed => (ev_line[i].delayed(), u_obs_line[i].delayed()),
                        };
                        let mut nxi = s.plant.a.mul_vec(&xi[i]);
                        axpy(&mut nxi, 1.0, &s.plant.b.mul_vec(u_obs));
                        axpy(&mut nxi, -1.0, &self.lc.mul_vec(&eta));
                        axpy(&mut nxi, 1.0, &self.l.mul_vec(drive));
                        nxi
                    })
                    .collect()
            } else {
                Vec::new()
            };
            x = x_next;
            z = z_next;
            xi = xi_next;
            v = s.exo.step(&v);
            check_state(t + 1, &[&x, &z, &xi])?;
        }
        Ok(trace)
    }
}

pub(crate) fn check_state(step: usize, blocks: &[&Vec<Vec<f64>>]) -> Result<()> {
    for block in blocks {
        for (i, vec) in block.iter().enumerate() {
            if vec.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence {
                    step,
                    message: format!("non-finite state of follower {}", i + 1),
                });
            }
            let norm = vec.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > DIVERGENCE_LIMIT {
                return Err(Error::Divergence {
                    step,
                    message: format!("state norm {norm:.3e} of follower {} exceeds {DIVERGENCE_LIMIT:e}", i + 1),
                });
            }
        }
    }
    Ok(())
}

fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|v| v * s).collect()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn axpy(acc: &mut [f64], a: f64, x: &[f64]) {
    for (s, v) in acc.iter_mut().zip(x) {
        *s += a * v;
    }
}
