//! Evaluation of one grid point.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use cirsim::quasi1d_model::{amplitudes, transmission_analytic, transmission_even_only};
use cirsim::radial_scattering::{count_bound_states, scattering_params};
use cirsim::wavepacket::{run_transmission, run_with_reference, Extraction, FreeReference};
use cirsim::Error;

use crate::config::{Config, Engine};

/// Short stable tag for an error, written to the `status` column.
pub fn error_code(e: &Error) -> &'static str {
    match e {
        Error::Domain(_) => "domain",
        Error::Convergence(_) => "convergence",
        Error::AboveThreshold(_) => "above_threshold",
        Error::Configuration(_) => "configuration",
        Error::Instability { .. } => "instability",
        Error::Stale(_) => "stale",
        Error::Shape { .. } => "shape",
        Error::Checkpoint(_) => "checkpoint",
        Error::Io(_) => "io",
    }
}

#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub a_s: Option<f64>,
    pub v_p: Option<f64>,
    pub k0: Option<f64>,
    pub t: Option<f64>,
    pub t_even_only: Option<f64>,
    pub source: Option<&'static str>,
    pub n_bound_s: Option<usize>,
    pub n_bound_p: Option<usize>,
    pub error: Option<(&'static str, String)>,
    pub diagnostics: BTreeMap<String, f64>,
    pub wall_time: f64,
}

impl Outcome {
    fn fail(mut self, e: Error) -> Self {
        self.error = Some((error_code(&e), e.to_string()));
        self
    }
}

/// Free wave-packet runs shared by all rows with the same trap, packet and
/// grid. The key is the JSON of those inputs.
#[derive(Default)]
pub struct ReferenceCache {
    runs: Mutex<HashMap<String, Arc<OnceLock<Result<FreeReference, String>>>>>,
}

impl ReferenceCache {
    fn get(&self, cfg: &Config) -> Result<FreeReference, Error> {
        let trap = cfg.trap()?;
        let packet = cfg.packet()?;
        let prop = cfg.propagation(&trap, &packet);
        let key = serde_json::to_string(&(&trap, &packet, &prop)).expect("serializable");
        let cell = self.runs.lock().expect("cache lock").entry(key).or_default().clone();
        cell.get_or_init(|| FreeReference::compute(&trap, &packet, &prop).map_err(|e| e.to_string()))
            .clone()
            .map_err(|e| Error::Convergence(format!("free reference run failed: {e}")))
    }
}

pub fn lengths(cfg: &Config) -> Outcome {
    let clock = Instant::now();
    let mut out = Outcome::default();
    let pot = match cfg.potential() {
        Ok(p) => p,
        Err(e) => return out.fail(e),
    };
    out.n_bound_s = Some(count_bound_states(&pot, 0));
    out.n_bound_p = Some(count_bound_states(&pot, 1));
    match scattering_params(&pot) {
        Ok(p) => {
            out.a_s = Some(p.a_s);
            out.v_p = Some(p.v_p);
        }
        Err(e) => out = out.fail(e),
    }
    out.wall_time = clock.elapsed().as_secs_f64();
    out
}

pub fn transmission(cfg: &Config, engine: Engine, cache: &ReferenceCache) -> Outcome {
    let clock = Instant::now();
    let mut out = match evaluate(cfg, engine, cache) {
        Ok(o) => o,
        Err((o, e)) => o.fail(e),
    };
    out.wall_time = clock.elapsed().as_secs_f64();
    out
}

fn evaluate(cfg: &Config, engine: Engine, cache: &ReferenceCache) -> Result<Outcome, (Outcome, Error)> {
    let mut out = Outcome::default();
    macro_rules! tryo {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => return Err((out, e)),
            }
        };
    }
    let pot = tryo!(cfg.potential());
    let trap = tryo!(cfg.trap());
    let k0 = (2.0 * cirsim::potentials::MU * cfg.collision.epsilon).sqrt();
    out.k0 = Some(k0);
    if !(cfg.collision.epsilon > 0.0 && trap.single_mode(cfg.collision.epsilon)) {
        return Err((
            out,
            Error::Configuration(format!(
                "epsilon = {} leaves the single-mode window (0, {})",
                cfg.collision.epsilon,
                2.0 * trap.omega()
            )),
        ));
    }
    if engine != Engine::WavePacket || !pot.is_zero() {
        let params = tryo!(scattering_params(&pot));
        out.a_s = Some(params.a_s);
        out.v_p = Some(params.v_p);
        if engine == Engine::Analytic {
            let amps = tryo!(amplitudes(&params, &trap, k0, cfg.collision.c));
            out.t = Some(transmission_analytic(&amps, k0).t);
            if cfg.sweep.even_only {
                out.t_even_only = Some(transmission_even_only(&amps, k0).t);
            }
            out.source = Some("analytic");
        }
    } else {
        out.a_s = Some(0.0);
        out.v_p = Some(0.0);
    }
    if engine == Engine::WavePacket {
        let packet = tryo!(cfg.packet());
        let prop = cfg.propagation(&trap, &packet);
        let res = if prop.extraction == Extraction::Density {
            tryo!(run_transmission(&trap, &pot, &packet, &prop))
        } else {
            let reference = tryo!(cache.get(cfg));
            tryo!(run_with_reference(&trap, &pot, &packet, &prop, &reference))
        };
        out.t = Some(res.t);
        out.source = Some(res.source.as_str());
        out.diagnostics = res.diagnostics;
    }
    Ok(out)
}
