//! One function per subcommand. Each writes its artifacts into an [`OutDir`].

use std::fmt::Write;

use rydgate::bench::{run_rb, run_rounds, RbSetup, RoundRecord, ShotRecord};
use rydgate::czgate::{default_dt, optimize_pulse, rabi_scan, simulate_gate, simulate_gate_with_dt, PulseProfile};
use rydgate::motional::{detuning_grid, fit_mean_phonon, resolved_peaks, sideband_spectrum};
use rydgate::readout::{calibrate_thresholds, classify, evaluate_readout, labeled_samples, simulate_counts, Thresholds, TrueState};
use rydgate::rng::derive;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::output::OutDir;
use crate::svg::{Plot, Series};

const STREAM_CALIBRATION: u64 = 0xca1;
const STREAM_HELD_OUT: u64 = 0x4e1d;
const STREAM_SCATTER: u64 = 0x5ca7;

/// Readout thresholds fixed in the config, or calibrated on a labeled set
/// drawn from the master seed.
pub fn thresholds(cfg: &RunConfig) -> Result<Thresholds, CliError> {
    if let Some(th) = cfg.rb.thresholds {
        return Ok(th);
    }
    let mut rng = derive(cfg.seed, &[STREAM_CALIBRATION]);
    Ok(calibrate_thresholds(&labeled_samples(&cfg.imaging, cfg.readout.calibration_samples, &mut rng))?)
}

pub fn rb_setup(cfg: &RunConfig) -> Result<RbSetup, CliError> {
    Ok(RbSetup {
        config: cfg.rb_config(),
        model: cfg.model.clone(),
        profile: cfg.profile(),
        noise: cfg.noise_model()?,
        imaging: cfg.imaging.clone(),
        thresholds: thresholds(cfg)?,
    })
}

#[derive(Serialize)]
struct PulseRecord<'a> {
    pulse: &'a PulseProfile,
}

#[derive(Serialize)]
struct OptimizeSummary {
    fidelity: f64,
    fidelity_half_step: f64,
    evals: usize,
    converged: bool,
    omega_t: f64,
}

pub fn optimize(cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    let model = cfg.model.noiseless();
    let res = optimize_pulse(&model, &cfg.profile(), cfg.optimize.budget)?;
    let p = &res.profile;
    let dt = default_dt(p, &model, (0.0, 0.0), (1.0, 1.0));
    let full = simulate_gate(p, &model, None, None)?.fidelity;
    let half = simulate_gate_with_dt(p, &model, None, None, dt / 2.0)?.fidelity;

    out.write("profile.toml", toml::to_string(&PulseRecord { pulse: p }).expect("profile serializes"))?;
    let mut csv = String::from("eval,infidelity\n");
    for (i, v) in res.history.iter().enumerate() {
        writeln!(csv, "{},{:e}", i + 1, v).unwrap();
    }
    out.write("convergence.csv", csv)?;
    out.write_json(
        "optimize.json",
        &OptimizeSummary {
            fidelity: full,
            fidelity_half_step: half,
            evals: res.evals,
            converged: res.converged,
            omega_t: p.duration * model.omega,
        },
    )?;
    if !res.converged {
        return Err(CliError::NonConvergence(format!(
            "best fidelity {:.6} after {} evaluations",
            res.fidelity, res.evals
        )));
    }
    Ok(())
}

fn shots_csv(shots: &[ShotRecord]) -> String {
    let mut csv = String::from("round,n_cz,randomization,shot,atomA_class,atomB_class,c1A,c2A,c1B,c2B\n");
    for s in shots {
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{}",
            s.round,
            s.n_cz,
            s.randomization,
            s.shot,
            s.atom_a.class,
            s.atom_b.class,
            s.atom_a.c1,
            s.atom_a.c2,
            s.atom_b.c1,
            s.atom_b.c2
        )
        .unwrap();
    }
    csv
}

pub fn rb(cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    let setup = rb_setup(cfg)?;
    let run = run_rb(&setup, cfg.seed, 0)?;
    let r = &run.result;
    out.write_json("rb_result.json", r)?;
    out.write("shots.csv", shots_csv(&run.shots))?;

    let n_max = r.points.last().map_or(1, |p| p.n_cz) as f64;
    let curve = |a: f64, p: f64, c: f64| -> Vec<(f64, f64)> {
        (0..=100).map(|i| {
            let n = n_max * i as f64 / 100.0;
            (n, a * p.powf(n) + c)
        })
        .collect()
    };
    let plot = Plot {
        title: "Global echoed RB".into(),
        x_label: "number of CZ gates".into(),
        y_label: "return probability".into(),
        series: vec![
            Series {
                name: "raw".into(),
                points: r.points.iter().map(|p| (p.n_cz as f64, p.return_prob)).collect(),
                color: "#1f77b4",
                markers: true,
            },
            Series {
                name: "raw fit (asymptote 0)".into(),
                points: curve(r.raw_fit.amplitude, r.p_raw, 0.0),
                color: "#1f77b4",
                markers: false,
            },
            Series {
                name: "loss post-selected".into(),
                points: r.points.iter().filter(|p| p.n_kept > 0).map(|p| (p.n_cz as f64, p.return_prob_post)).collect(),
                color: "#d62728",
                markers: true,
            },
            Series {
                name: "post-selected fit (asymptote 1/4)".into(),
                points: curve(r.corrected_fit.amplitude, r.p_corrected, 0.25),
                color: "#d62728",
                markers: false,
            },
        ],
        notes: vec![
            format!("p_raw = {:.5}", r.p_raw),
            format!("p_corrected = {:.5}", r.p_corrected),
            format!("F_raw = {:.5}({:.0})", r.f_raw, 1e5 * r.f_raw_std_err),
            format!("F_corrected = {:.5}({:.0})", r.f_corrected, 1e5 * r.f_corrected_std_err),
        ],
    };
    out.write("decay.svg", plot.render())
}

#[derive(Serialize)]
struct PolicyRounds {
    policy: String,
    records: Vec<RoundRecord>,
}

#[derive(Serialize)]
struct RoundsSummary {
    heating_per_round: f64,
    policies: Vec<PolicyRounds>,
}

pub fn rounds(cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    let setup = rb_setup(cfg)?;
    let motion = cfg.motion_setup()?;
    let colors = ["#d62728", "#ff7f0e", "#2ca02c", "#1f77b4", "#9467bd"];
    let mut summary = RoundsSummary {
        heating_per_round: cfg.rounds.heating_per_round,
        policies: Vec::new(),
    };
    let mut series = Vec::new();
    for (k, policy) in cfg.rounds.policies.iter().enumerate() {
        let records = run_rounds(cfg.rounds.n_rounds, policy, cfg.rounds.heating_per_round, &setup, &motion, cfg.seed)?;
        let pts: Vec<(f64, f64)> = records.iter().map(|r| (r.round as f64, r.f_corrected)).collect();
        let color = colors[k % colors.len()];
        series.push(Series {
            name: policy.name().into(),
            points: pts.clone(),
            color,
            markers: false,
        });
        series.push(Series {
            name: String::new(),
            points: pts,
            color,
            markers: true,
        });
        summary.policies.push(PolicyRounds {
            policy: policy.name().into(),
            records,
        });
    }
    out.write_json("rounds.json", &summary)?;
    let plot = Plot {
        title: "Corrected CZ fidelity per mid-circuit round".into(),
        x_label: "round".into(),
        y_label: "F_corrected".into(),
        series,
        notes: vec![format!("heating {} phonons/round", cfg.rounds.heating_per_round)],
    };
    out.write("rounds.svg", plot.render())
}

#[derive(Serialize)]
struct ModeFit {
    mode: String,
    nbar: f64,
    r: f64,
}

#[derive(Serialize)]
struct Thermometry {
    modes: Vec<ModeFit>,
    resolved_peaks: usize,
    peak_detunings_hz: Vec<f64>,
}

pub fn sideband(cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    let modes = cfg.motional.modes()?;
    let sb = &cfg.sideband;
    let top = modes.iter().map(|m| m.trap_freq()).fold(0.0, f64::max);
    let low = modes.iter().map(|m| m.trap_freq()).fold(f64::INFINITY, f64::min);
    let grid = detuning_grid(sb.span_factor * top, sb.points);
    let spec = sideband_spectrum(&modes, sb.probe_area / sb.probe_time, sb.probe_time, &grid);
    let to_hz = |w: f64| w / (2.0 * std::f64::consts::PI);

    let mut fits = Vec::new();
    for m in &modes {
        let fit = fit_mean_phonon(&spec, m.trap_freq())?;
        fits.push(ModeFit {
            mode: m.label().to_string(),
            nbar: fit.nbar,
            r: fit.ratio,
        });
    }
    let peaks = resolved_peaks(&spec, 0.5 * low, sb.peak_threshold);
    let mut csv = String::from("detuning_hz,transfer\n");
    for (d, t) in spec.detunings.iter().zip(&spec.transfer) {
        writeln!(csv, "{},{}", to_hz(*d), t).unwrap();
    }
    out.write("spectrum.csv", csv)?;
    let notes = fits.iter().map(|f| format!("{} nbar = {:.4}", f.mode, f.nbar)).collect();
    out.write_json(
        "thermometry.json",
        &Thermometry {
            modes: fits,
            resolved_peaks: peaks.len(),
            peak_detunings_hz: peaks.iter().map(|d| to_hz(*d)).collect(),
        },
    )?;
    let plot = Plot {
        title: "Raman sideband spectrum".into(),
        x_label: "two-photon detuning (Hz)".into(),
        y_label: "transfer probability".into(),
        series: vec![Series {
            name: "spectrum".into(),
            points: spec.detunings.iter().map(|d| to_hz(*d)).zip(spec.transfer.iter().cloned()).collect(),
            color: "#1f77b4",
            markers: false,
        }],
        notes,
    };
    out.write("spectrum.svg", plot.render())
}

#[derive(Serialize)]
struct ReadoutSummary {
    thresholds: Thresholds,
    /// Rows: prepared Zero, One, Lost. Columns: assigned Zero, One, Loss.
    confusion: [[f64; 3]; 3],
    state_fidelity: f64,
    survival: f64,
    held_out_per_state: usize,
}

#[derive(Serialize)]
struct ThresholdRecord {
    thresholds: Thresholds,
}

pub fn readout(cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    let th = thresholds(cfg)?;
    let n = cfg.readout.held_out;
    let report = evaluate_readout(&cfg.imaging, &th, n, &mut derive(cfg.seed, &[STREAM_HELD_OUT]))?;
    let mut rng = derive(cfg.seed, &[STREAM_SCATTER]);
    let mut csv = String::from("trial,true_state,c1,c2,class\n");
    let names = [(TrueState::Zero, "zero"), (TrueState::One, "one"), (TrueState::Lost, "lost")];
    let mut trial = 0;
    for (state, name) in names {
        for _ in 0..cfg.readout.scatter_trials {
            let c = simulate_counts(state, &cfg.imaging, &mut rng);
            writeln!(csv, "{trial},{name},{},{},{}", c.c1, c.c2, classify(c.c1, c.c2, &th).class).unwrap();
            trial += 1;
        }
    }
    out.write("scatter.csv", csv)?;
    out.write_json(
        "confusion.json",
        &ReadoutSummary {
            thresholds: th,
            confusion: report.confusion,
            state_fidelity: report.state_fidelity,
            survival: report.survival,
            held_out_per_state: n,
        },
    )?;
    out.write("thresholds.toml", toml::to_string(&ThresholdRecord { thresholds: th }).expect("thresholds serialize"))
}

pub fn rabi(cfg: &RunConfig, out: &mut OutDir) -> Result<(), CliError> {
    let n = cfg.rabi.points;
    let durations: Vec<f64> = (0..n).map(|i| cfg.rabi.t_max * i as f64 / (n - 1) as f64).collect();
    let scan = rabi_scan(&cfg.model.noiseless(), &durations)?;
    let mut csv = String::from("duration_s,rydberg_population\n");
    for (t, p) in &scan {
        writeln!(csv, "{t:e},{p}").unwrap();
    }
    out.write("rabi.csv", csv)?;
    let plot = Plot {
        title: "Resonant ground-Rydberg Rabi oscillation".into(),
        x_label: "pulse duration (ns)".into(),
        y_label: "Rydberg population".into(),
        series: vec![Series {
            name: format!("Ω/2π = {:.3} MHz", cfg.model.omega / (2.0 * std::f64::consts::PI) / 1e6),
            points: scan.iter().map(|(t, p)| (t * 1e9, *p)).collect(),
            color: "#1f77b4",
            markers: false,
        }],
        notes: vec![],
    };
    out.write("rabi.svg", plot.render())
}
