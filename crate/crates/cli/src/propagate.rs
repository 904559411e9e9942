//! `propagate`: one wave-packet run, a time series and periodic checkpoints.
//!
//! The checkpoint sits next to the table as `<out>.ckpt`; `--resume` restarts
//! from it and drops series rows past its step.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use cirsim::wavepacket::{
    asymptotic_status, extract_transmission_density, initialize_packet, read_checkpoint, write_checkpoint, Propagator,
};

use crate::config::Config;
use crate::output::{fmt_f64, header_comments, record, write_atomic};
use crate::Failure;

const COLUMNS: [&str; 7] =
    ["step", "time", "norm", "forward_probability", "forward_mean_z", "inner_density", "t_density"];

fn checkpoint_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".ckpt");
    out.with_file_name(name)
}

pub fn run(cfg: &Config, out: Option<&Path>, resume: bool) -> Result<(), Failure> {
    let setup = || -> cirsim::Result<_> {
        let trap = cfg.trap()?;
        let pot = cfg.potential()?;
        let packet = cfg.packet()?;
        packet.validate(&trap, pot.r0)?;
        let prop = cfg.propagation(&trap, &packet);
        prop.validate()?;
        Ok((trap, pot, packet, prop))
    };
    let (trap, pot, packet, prop) = setup().map_err(|e| Failure::Config(e.into()))?;
    let ckpt = out.map(checkpoint_path);
    if resume && ckpt.is_none() {
        return Err(Failure::Config(anyhow!("--resume needs an output file")));
    }
    let hash = cfg.hash();

    let mut rows: Vec<String> = Vec::new();
    let mut psi = match (&ckpt, resume) {
        (Some(c), true) if c.exists() => {
            let psi = read_checkpoint(BufReader::new(File::open(c).context("opening checkpoint")?))
                .map_err(|e| Failure::Other(e.into()))?;
            if psi.grid != prop.grid {
                return Err(Failure::Config(anyhow!("checkpoint grid differs from the configured grid")));
            }
            if let Some(p) = out.filter(|p| p.exists()) {
                let text = std::fs::read_to_string(p).context("reading series")?;
                rows = text
                    .lines()
                    .filter(|l| !l.starts_with('#') && !l.starts_with("step"))
                    .filter(|l| l.split(',').next().and_then(|s| s.parse::<u64>().ok()).is_some_and(|s| s <= psi.step))
                    .map(String::from)
                    .collect();
            }
            psi
        }
        _ => initialize_packet(&trap, &packet, &prop.grid).map_err(|e| Failure::Config(e.into()))?,
    };

    let mut stepper = Propagator::new(&psi, Some(&trap), &pot, &prop).map_err(|e| Failure::Config(e.into()))?;
    let every = prop.stop.check_every.max(1);
    let save = |psi: &cirsim::wavepacket::WaveFunctionGrid| -> anyhow::Result<()> {
        if let Some(c) = &ckpt {
            let tmp = c.with_extension("ckpt.tmp");
            write_checkpoint(psi, BufWriter::new(File::create(&tmp)?))?;
            std::fs::rename(&tmp, c)?;
        }
        Ok(())
    };
    let result = loop {
        let status = asymptotic_status(&psi, &packet, &prop.stop);
        let t = if status.ready {
            extract_transmission_density(&psi, &packet, &prop.stop, pot.r0).ok().map(|r| r.t)
        } else {
            None
        };
        if rows.last().and_then(|l| l.split(',').next()) != Some(psi.step.to_string().as_str()) {
            rows.push(record(&[
                psi.step.to_string(),
                fmt_f64(psi.time),
                fmt_f64(psi.norm()),
                fmt_f64(status.forward_probability),
                fmt_f64(status.forward_mean_z),
                fmt_f64(status.inner_density),
                t.map(fmt_f64).unwrap_or_default(),
            ]));
        }
        if status.ready {
            break Ok(t);
        }
        if psi.step as usize >= prop.max_steps {
            break Err(anyhow!("no asymptotic state within {} steps", prop.max_steps));
        }
        if let Err(e) = stepper.run(&mut psi, every) {
            break Err(e.into());
        }
        let n = cfg.propagation.checkpoint_every;
        if n > 0 && psi.step as usize % n < every {
            save(&psi)?;
        }
    };

    let mut text = header_comments("propagate", &hash);
    text.push_str(&record(&COLUMNS.map(String::from)));
    text.push('\n');
    for r in &rows {
        text.push_str(r);
        text.push('\n');
    }
    match out {
        Some(p) => write_atomic(p, &text)?,
        None => print!("{text}"),
    }
    match result {
        Ok(t) => {
            save(&psi)?;
            eprintln!("cirsim: T = {} after {} steps", t.map(fmt_f64).unwrap_or_else(|| "n/a".into()), psi.step);
            Ok(())
        }
        Err(e) => {
            save(&psi)?;
            Err(Failure::Other(e))
        }
    }
}
