//! Learned feed-forward hysteresis compensation: seed the command with the
//! inverse model, then refine it against the forward model until every
//! joint's predicted error is within the threshold.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::kinematics::{JointConfig, ManipulatorSpec};
use crate::learn::{Model, SequenceWindow};

/// Anything that maps a joint-angle window to one joint configuration.
pub trait JointModel {
    fn predict(&self, window: &SequenceWindow) -> JointConfig;
    fn window_len(&self) -> usize;
}

impl JointModel for Model {
    fn predict(&self, window: &SequenceWindow) -> JointConfig {
        Model::predict(self, window)
    }

    fn window_len(&self) -> usize {
        self.config.window
    }
}

/// A closure-backed model, mainly for analytic stand-ins.
pub struct FnModel<F: Fn(&SequenceWindow) -> JointConfig> {
    pub f: F,
    pub window: usize,
}

impl<F: Fn(&SequenceWindow) -> JointConfig> JointModel for FnModel<F> {
    fn predict(&self, window: &SequenceWindow) -> JointConfig {
        (self.f)(window)
    }

    fn window_len(&self) -> usize {
        self.window
    }
}

/// What fills the rows before `t` in the refinement window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HistoryMode {
    /// desired angles, with only the newest row replaced by the candidate
    #[default]
    Desired,
    /// previously issued calibrated commands
    Calibrated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompensatorConfig {
    /// maximum refinement iterations
    pub m: usize,
    /// step per degree of predicted error
    pub alpha: f64,
    /// per-joint error threshold (deg); strictly larger errors are corrected
    pub thr: f64,
    pub q: usize,
    pub window: usize,
    pub history: HistoryMode,
}

impl Default for CompensatorConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl CompensatorConfig {
    /// M = 50, α = 0.001, Thr = 4.
    pub fn reference() -> Self {
        Self { m: 50, alpha: 0.001, thr: 4.0, q: 5, window: 80, history: HistoryMode::Desired }
    }

    /// [`Self::reference`] with α = 0.5 and the issued commands as history.
    pub fn desk() -> Self {
        Self { alpha: 0.5, history: HistoryMode::Calibrated, ..Self::reference() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.m < 1 || !(self.alpha > 0.0) || !(self.thr >= 0.0) {
            return Err("compensator needs M ≥ 1, α > 0 and Thr ≥ 0".into());
        }
        if self.q != 5 {
            return Err("compensator joint count must be 5".into());
        }
        if self.window < 2 {
            return Err("compensator window must be ≥ 2".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Compensation {
    pub q: JointConfig,
    /// refinement iterations that changed at least one joint
    pub updates: usize,
    /// forward-model error of the returned command (deg)
    pub residual: JointConfig,
    /// every joint's residual is within the threshold
    pub converged: bool,
}

/// Inverse-model seed plus thresholded forward-model refinement, with the
/// desired window itself as the refinement history.
pub fn compensate(
    desired: &SequenceWindow,
    forward: &dyn JointModel,
    inverse: &dyn JointModel,
    cfg: &CompensatorConfig,
) -> Compensation {
    compensate_with_history(desired, desired, forward, inverse, cfg)
}

/// As [`compensate`] with an explicit refinement history; only its newest
/// row is replaced by the candidate.
pub fn compensate_with_history(
    desired: &SequenceWindow,
    history: &SequenceWindow,
    forward: &dyn JointModel,
    inverse: &dyn JointModel,
    cfg: &CompensatorConfig,
) -> Compensation {
    let target = desired.last();
    let mut q = inverse.predict(desired);
    let mut updates = 0;
    let mut loss = forward.predict(&history.with_last(q)).sub(&target);
    for _ in 0..cfg.m {
        let mut changed = false;
        for j in 0..5 {
            if loss[j].abs() > cfg.thr {
                // positive loss means overshoot: pull the command back
                q[j] -= cfg.alpha * loss[j];
                changed = true;
            }
        }
        if !changed {
            break;
        }
        updates += 1;
        loss = forward.predict(&history.with_last(q)).sub(&target);
    }
    let converged = loss.0.iter().all(|l| l.abs() <= cfg.thr);
    Compensation { q, updates, residual: loss, converged }
}

/// Wraps the compensator with the desired-angle history and an optional
/// bypass that forwards desired angles untouched.
pub struct CalibratedController {
    pub forward: Box<dyn JointModel>,
    pub inverse: Box<dyn JointModel>,
    pub cfg: CompensatorConfig,
    pub bypass: bool,
    /// commands are clamped into these limits when set
    pub limits: Option<ManipulatorSpec>,
    desired: VecDeque<JointConfig>,
    issued: VecDeque<JointConfig>,
    last: Option<Compensation>,
}

impl CalibratedController {
    pub fn new(forward: Box<dyn JointModel>, inverse: Box<dyn JointModel>, cfg: CompensatorConfig) -> Self {
        Self {
            forward,
            inverse,
            cfg,
            bypass: false,
            limits: None,
            desired: VecDeque::with_capacity(cfg.window),
            issued: VecDeque::with_capacity(cfg.window),
            last: None,
        }
    }

    /// Pass-through controller; needs no models.
    pub fn uncalibrated(window: usize) -> Self {
        let ident = || -> Box<dyn JointModel> { Box::new(FnModel { f: |w: &SequenceWindow| w.last(), window }) };
        let mut c = Self::new(ident(), ident(), CompensatorConfig { window, ..CompensatorConfig::desk() });
        c.bypass = true;
        c
    }

    pub fn with_limits(mut self, spec: ManipulatorSpec) -> Self {
        self.limits = Some(spec);
        self
    }

    /// Desired angles seen so far (oldest first, at most `L − 1`).
    pub fn history(&self) -> Vec<JointConfig> {
        self.desired.iter().copied().collect()
    }

    pub fn last_compensation(&self) -> Option<&Compensation> {
        self.last.as_ref()
    }

    pub fn reset(&mut self) {
        self.desired.clear();
        self.issued.clear();
        self.last = None;
    }

    fn push(buf: &mut VecDeque<JointConfig>, q: JointConfig, cap: usize) {
        if cap == 0 {
            return;
        }
        if buf.len() == cap {
            buf.pop_front();
        }
        buf.push_back(q);
    }

    /// Window of the stored history plus `current`.
    pub fn window(&self, current: JointConfig) -> SequenceWindow {
        let hist: Vec<JointConfig> = self.desired.iter().copied().collect();
        SequenceWindow::from_history(&hist, current, self.cfg.window)
    }

    pub fn calibrated_step(&mut self, q_desired: JointConfig) -> JointConfig {
        let out = if self.bypass {
            self.last = None;
            q_desired
        } else {
            let desired = self.window(q_desired);
            let comp = match self.cfg.history {
                HistoryMode::Desired => compensate(&desired, &*self.forward, &*self.inverse, &self.cfg),
                HistoryMode::Calibrated => {
                    let issued: Vec<JointConfig> = self.issued.iter().copied().collect();
                    let hist = SequenceWindow::from_history(&issued, q_desired, self.cfg.window);
                    compensate_with_history(&desired, &hist, &*self.forward, &*self.inverse, &self.cfg)
                }
            };
            self.last = Some(comp);
            match &self.limits {
                Some(spec) => comp.q.clamped(spec),
                None => comp.q,
            }
        };
        let cap = self.cfg.window - 1;
        Self::push(&mut self.desired, q_desired, cap);
        Self::push(&mut self.issued, out, cap);
        out
    }
}
