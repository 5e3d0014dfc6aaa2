//! Subcommand implementations.
//!
//! Every command loads the configuration once, computes all of its results
//! in memory, and only then writes files through [`Staging`], so a failure
//! partway through leaves the output directory untouched.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use polarscat::dispersion::{
    extract_branch_energies, find_crossing_detuning, fit_coupling, BranchExtraction, BranchRecord,
    DetuningSeries, DispersionError,
};
use polarscat::io::{self, parse_config_with_overrides, RunConfig, SweepAxis};
use polarscat::lineshape::{fit_two_peaks, relative_strengths, TwoPeakFit};
use polarscat::oscillator::{
    coupling_from_splitting, hopfield_photon_weights, polariton_energies,
};
use polarscat::scattermodel::synthesize_scattering;
use polarscat::tmm::{deepest_reflectance_dip, dip_splitting, spectrum_sweep};
use polarscat::CoupledOscillatorParams;

use crate::manifest::{sha256_hex, Staging};
use crate::{CommonArgs, Failure};

/// Everything a subcommand needs: the resolved configuration plus the
/// invocation details recorded in manifests.
pub struct Ctx {
    pub config: RunConfig,
    pub config_sha256: String,
    pub out_dir: PathBuf,
    pub overrides: Vec<String>,
    pub quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", msg.as_ref());
        }
    }

    fn commit(&self, staging: Staging, subcommand: &str) -> Result<(), Failure> {
        let n = staging.len();
        let manifest = staging
            .commit(
                &self.out_dir,
                subcommand,
                &self.config_sha256,
                self.config.seed,
                &self.overrides,
            )
            .map_err(|e| Failure::Io(format!("writing outputs: {e}")))?;
        self.say(format!(
            "{subcommand}: wrote {n} file(s) and {}",
            manifest.display()
        ));
        Ok(())
    }
}

/// Reads and validates the configuration, applies `--set` overrides and the
/// `--seed` replacement, and packages the invocation for the subcommands.
pub fn load_ctx(args: &CommonArgs) -> Result<Ctx, Failure> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Failure::Io(format!("cannot read config {}: {e}", args.config.display())))?;
    let mut overrides = Vec::new();
    for kv in &args.set {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Schema(format!("--set expects key=value, got `{kv}`")))?;
        overrides.push((key.trim().to_string(), value.trim().to_string()));
    }
    let mut config = parse_config_with_overrides(&text, &overrides)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    Ok(Ctx {
        config,
        config_sha256: sha256_hex(text.as_bytes()),
        out_dir: args.out_dir.clone(),
        overrides: args.set.clone(),
        quiet: args.quiet,
    })
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Simulates the configured stack and writes its R/T/A spectra.
pub fn simulate(ctx: &Ctx) -> Result<(), Failure> {
    let (stack, film_d) = ctx.config.build_stack()?;
    let grid = ctx.config.energy_grid();
    let sweep = spectrum_sweep(&stack, &grid)?;

    let mut staging = Staging::new();
    staging.add("reflectance.csv", io::spectrum_csv_string(&sweep.reflectance));
    staging.add(
        "transmittance.csv",
        io::spectrum_csv_string(&sweep.transmittance),
    );
    staging.add("absorption.csv", io::spectrum_csv_string(&sweep.absorption));
    staging.note(format!("film_thickness_nm = {film_d:.6}"));
    staging.note(format!(
        "film_strength_ev2 = {:.6e}",
        ctx.config.film_strength()
    ));
    match dip_splitting(&stack, &grid)? {
        Some(s) => staging.note(format!("reflectance_dip_splitting_ev = {s:.6}")),
        None => staging.note("reflectance dips unresolved"),
    }
    ctx.say(format!(
        "simulate: film thickness {film_d:.2} nm on a {}-point grid",
        grid.len()
    ));
    ctx.commit(staging, "simulate")
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

/// Simulates every sweep point, writes per-point spectra, a per-point summary,
/// and (when the detunings form a usable axis) the branch-dispersion series.
pub fn sweep(ctx: &Ctx) -> Result<(), Failure> {
    let (axis, points) = ctx.config.sweep_points()?;
    let grid = ctx.config.energy_grid();
    let e_x = ctx.config.oscillator.e_x_ev;

    let mut staging = Staging::new();
    let mut summary = String::from("label,axis_value,detuning_ev,splitting_ev,resolved\n");
    let mut records = Vec::new();
    for p in &points {
        let sw = spectrum_sweep(&p.stack, &grid)?;
        staging.add(
            format!("spectra/{}_reflectance.csv", p.label),
            io::spectrum_csv_string(&sw.reflectance),
        );
        staging.add(
            format!("spectra/{}_transmittance.csv", p.label),
            io::spectrum_csv_string(&sw.transmittance),
        );
        staging.add(
            format!("spectra/{}_absorption.csv", p.label),
            io::spectrum_csv_string(&sw.absorption),
        );

        let detuning =
            deepest_reflectance_dip(&p.stack.undoped(), &grid)?.map(|e_c| e_c - e_x);
        let branches = extract_branch_energies(&sw.reflectance, BranchExtraction::ReflectionDips);
        match (detuning, branches) {
            (Some(d), Ok((e_u, e_l))) => {
                let _ = writeln!(
                    summary,
                    "{},{:.16e},{d:.16e},{:.16e},1",
                    p.label,
                    p.axis_value,
                    e_u - e_l
                );
                records.push(BranchRecord {
                    detuning_ev: d,
                    e_upper_ev: e_u,
                    e_lower_ev: e_l,
                    sigma_u: None,
                    sigma_l: None,
                });
            }
            (detuning, _) => {
                let d = detuning.map(|d| format!("{d:.16e}")).unwrap_or_default();
                let _ = writeln!(summary, "{},{:.16e},{d},,0", p.label, p.axis_value);
                staging.note(format!("{}: no resolvable branch pair", p.label));
            }
        }
    }
    staging.add("sweep_summary.csv", summary);

    records.sort_by(|a, b| a.detuning_ev.partial_cmp(&b.detuning_ev).unwrap());
    let distinct = records
        .windows(2)
        .all(|w| w[1].detuning_ev > w[0].detuning_ev);
    if records.is_empty() {
        staging.note("no resolved points, series.csv not written");
    } else if !distinct {
        // Concentration sweeps hold the detuning fixed, so the records do
        // not span a detuning axis; the summary still has the splittings.
        staging.note("detunings are not distinct across points, series.csv not written");
    } else {
        let series =
            DetuningSeries::new(records).map_err(|e| Failure::Analysis(e.to_string()))?;
        staging.add("series.csv", io::series_csv_string(&series));
    }

    ctx.say(format!(
        "sweep: {} point(s) along the {} axis",
        points.len(),
        match axis {
            SweepAxis::Thickness => "thickness",
            SweepAxis::Concentration => "concentration",
        }
    ));
    ctx.commit(staging, "sweep")
}

// ---------------------------------------------------------------------------
// synth-scatter
// ---------------------------------------------------------------------------

struct SynthPlan {
    label: String,
    detuning_ev: f64,
    v_ev: f64,
}

/// Synthesizes a scattering spectrum per configured point and writes an index
/// (`synth_points.csv`) that downstream fitting consumes.
pub fn synth_scatter(ctx: &Ctx) -> Result<(), Failure> {
    let grid = ctx.config.energy_grid();
    let osc = &ctx.config.oscillator;
    let law = ctx.config.law();

    let mut plans = Vec::new();
    if ctx.config.sweep.is_some() {
        let (axis, points) = ctx.config.sweep_points()?;
        // A thickness sweep keeps the film, and with it the coupling, fixed;
        // the value comes from the configured (resonant) stack. A
        // concentration sweep changes the coupling point by point, so it is
        // re-derived from each stack's own dip splitting.
        let shared_v = match axis {
            SweepAxis::Thickness => Some(ctx.config.resolved_v_ev()?),
            SweepAxis::Concentration => None,
        };
        for p in &points {
            let detuning = deepest_reflectance_dip(&p.stack.undoped(), &grid)?
                .map(|e_c| e_c - osc.e_x_ev)
                .ok_or_else(|| {
                    Failure::Analysis(format!("{}: no cavity resonance on the grid", p.label))
                })?;
            let v_ev = match shared_v {
                Some(v) => v,
                None => {
                    let s = dip_splitting(&p.stack, &grid)?.ok_or_else(|| {
                        Failure::Analysis(format!(
                            "{}: dip splitting unresolved, cannot derive the coupling",
                            p.label
                        ))
                    })?;
                    coupling_from_splitting(s, osc.gamma_c_ev, osc.gamma_x_ev)
                }
            };
            plans.push(SynthPlan {
                label: p.label.clone(),
                detuning_ev: detuning,
                v_ev,
            });
        }
    } else {
        let (stack, _) = ctx.config.build_stack()?;
        let detuning = deepest_reflectance_dip(&stack.undoped(), &grid)?
            .map(|e_c| e_c - osc.e_x_ev)
            .ok_or_else(|| Failure::Analysis("no cavity resonance on the grid".into()))?;
        plans.push(SynthPlan {
            label: "single".into(),
            detuning_ev: detuning,
            v_ev: ctx.config.resolved_v_ev()?,
        });
    }

    let mut staging = Staging::new();
    let mut index = String::from("label,detuning_ev,v_ev,file\n");
    for (i, plan) in plans.iter().enumerate() {
        let params = CoupledOscillatorParams::new(
            osc.e_x_ev + plan.detuning_ev,
            osc.e_x_ev,
            plan.v_ev,
            osc.gamma_c_ev,
            osc.gamma_x_ev,
        );
        params
            .validate()
            .map_err(|e| Failure::Schema(e.to_string()))?;
        // One stream per point, displaced from the base seed by the point
        // index so reruns reproduce every spectrum exactly.
        let seed = ctx.config.seed.wrapping_add(i as u64);
        let spectrum = synthesize_scattering(&params, &law, &grid, seed)?;
        let file = format!("scatter/{}_scattering.csv", plan.label);
        let _ = writeln!(
            index,
            "{},{:.16e},{:.16e},{file}",
            plan.label, plan.detuning_ev, plan.v_ev
        );
        staging.add(file, io::spectrum_csv_string(&spectrum));
    }
    staging.add("synth_points.csv", index);

    ctx.say(format!("synth-scatter: {} spectrum(s)", plans.len()));
    ctx.commit(staging, "synth-scatter")
}

// ---------------------------------------------------------------------------
// fit-spectrum
// ---------------------------------------------------------------------------

/// Fits the two-peak line shape. With `--input` a single spectrum is fitted
/// and reported; otherwise every spectrum listed in `synth_points.csv` is
/// fitted and assembled into `fitted_series.csv`.
pub fn fit_spectrum(ctx: &Ctx, input: Option<&Path>) -> Result<(), Failure> {
    match input {
        Some(path) => fit_single_spectrum(ctx, path),
        None => fit_indexed_spectra(ctx),
    }
}

fn fit_single_spectrum(ctx: &Ctx, path: &Path) -> Result<(), Failure> {
    let raw = io::read_spectrum_csv(path)?;
    let fit = fit_two_peaks(&raw.energies, &raw.counts, None)?;
    let (sigma_u, sigma_l) = relative_strengths(&fit)?;
    let report = two_peak_report(&path.display().to_string(), &fit, sigma_u, sigma_l);
    ctx.say(&report);

    let mut staging = Staging::new();
    staging.add("spectrum_fit.txt", report);
    ctx.commit(staging, "fit-spectrum")
}

fn two_peak_report(source: &str, fit: &TwoPeakFit, sigma_u: f64, sigma_l: f64) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "two-peak fit of {source}");
    for (name, p) in [("upper", &fit.upper), ("lower", &fit.lower)] {
        let _ = writeln!(
            out,
            "  {name}: amplitude {:.6}, center {:.6} eV, width {:.6} eV, skewness {:+.4}",
            p.amplitude, p.center_ev, p.width_ev, p.skewness
        );
    }
    let _ = writeln!(out, "  baseline {:+.6}, cost {:.6e}", fit.baseline, fit.cost);
    let _ = writeln!(out, "  sigma_u {sigma_u:.6}, sigma_l {sigma_l:.6}");
    out
}

const SYNTH_INDEX_HEADER: &str = "label,detuning_ev,v_ev,file";

struct SynthIndexEntry {
    label: String,
    detuning_ev: f64,
    v_ev: f64,
    file: String,
}

fn parse_synth_index(text: &str) -> Result<Vec<SynthIndexEntry>, Failure> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end_matches('\r') == SYNTH_INDEX_HEADER => {}
        other => {
            return Err(Failure::Schema(format!(
                "synth_points.csv: expected header `{SYNTH_INDEX_HEADER}`, got `{}`",
                other.map(|(_, l)| l).unwrap_or_default()
            )))
        }
    }
    let mut entries = Vec::new();
    for (i, raw_line) in lines {
        let line = raw_line.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Failure::Schema(format!(
                "synth_points.csv row {}: expected 4 fields, got {}",
                i + 1,
                fields.len()
            )));
        }
        let number = |col: usize, name: &str| -> Result<f64, Failure> {
            fields[col].trim().parse::<f64>().map_err(|_| {
                Failure::Schema(format!(
                    "synth_points.csv row {}: bad {name} `{}`",
                    i + 1,
                    fields[col]
                ))
            })
        };
        entries.push(SynthIndexEntry {
            label: fields[0].to_string(),
            detuning_ev: number(1, "detuning")?,
            v_ev: number(2, "coupling")?,
            file: fields[3].to_string(),
        });
    }
    Ok(entries)
}

/// Starting parameters for a synthesized spectrum: centers at the branch
/// energies implied by the recorded detuning and coupling, widths and skews
/// from the configured law, amplitudes read off the data.
fn physics_guess(
    ctx: &Ctx,
    entry: &SynthIndexEntry,
    energies: &[f64],
    values: &[f64],
) -> [f64; 9] {
    let osc = &ctx.config.oscillator;
    let law = ctx.config.law();
    let params = CoupledOscillatorParams::new(
        osc.e_x_ev + entry.detuning_ev,
        osc.e_x_ev,
        entry.v_ev,
        osc.gamma_c_ev,
        osc.gamma_x_ev,
    );
    let (e_plus, e_minus) = polariton_energies(&params);
    let baseline = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let height_at = |center: f64| -> f64 {
        let i = energies
            .partition_point(|&e| e < center)
            .min(energies.len() - 1);
        (values[i] - baseline).max(1e-3)
    };
    [
        height_at(e_plus.re),
        e_plus.re,
        law.width_ev,
        law.skew_upper,
        height_at(e_minus.re),
        e_minus.re,
        law.width_ev,
        law.skew_lower,
        baseline,
    ]
}

fn fit_indexed_spectra(ctx: &Ctx) -> Result<(), Failure> {
    let index_path = ctx.out_dir.join("synth_points.csv");
    let text = std::fs::read_to_string(&index_path).map_err(|e| {
        Failure::Io(format!(
            "cannot read {} (run synth-scatter first): {e}",
            index_path.display()
        ))
    })?;
    let entries = parse_synth_index(&text)?;
    if entries.is_empty() {
        return Err(Failure::Schema("synth_points.csv lists no spectra".into()));
    }

    let mut params_csv = String::from(
        "label,detuning_ev,amplitude_u,center_u_ev,width_u_ev,skew_u,\
         amplitude_l,center_l_ev,width_l_ev,skew_l,baseline,cost\n",
    );
    let mut records = Vec::new();
    for entry in &entries {
        let raw = io::read_spectrum_csv(ctx.out_dir.join(&entry.file))?;
        // The synthesis conditions are on record, so seed the fit from the
        // branch energies they imply; fall back to the blind data-driven
        // start if that refuses to converge.
        let seeded = physics_guess(ctx, entry, &raw.energies, &raw.counts);
        let fit = fit_two_peaks(&raw.energies, &raw.counts, Some(seeded))
            .or_else(|_| fit_two_peaks(&raw.energies, &raw.counts, None))
            .map_err(|e| Failure::Analysis(format!("{}: {e}", entry.label)))?;
        let (sigma_u, sigma_l) = relative_strengths(&fit)
            .map_err(|e| Failure::Analysis(format!("{}: {e}", entry.label)))?;
        let (u, l) = (&fit.upper, &fit.lower);
        let _ = writeln!(
            params_csv,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            entry.label,
            entry.detuning_ev,
            u.amplitude,
            u.center_ev,
            u.width_ev,
            u.skewness,
            l.amplitude,
            l.center_ev,
            l.width_ev,
            l.skewness,
            fit.baseline,
            fit.cost
        );
        records.push(BranchRecord {
            detuning_ev: entry.detuning_ev,
            e_upper_ev: u.center_ev,
            e_lower_ev: l.center_ev,
            sigma_u: Some(sigma_u),
            sigma_l: Some(sigma_l),
        });
    }
    records.sort_by(|a, b| a.detuning_ev.partial_cmp(&b.detuning_ev).unwrap());
    let series = DetuningSeries::new(records).map_err(|e| Failure::Analysis(e.to_string()))?;

    let mut staging = Staging::new();
    staging.add("fitted_series.csv", io::series_csv_string(&series));
    staging.add("fit_parameters.csv", params_csv);
    ctx.say(format!("fit-spectrum: {} spectrum(s) fitted", entries.len()));
    ctx.commit(staging, "fit-spectrum")
}

// ---------------------------------------------------------------------------
// fit-dispersion
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct CouplingSummary {
    mode: String,
    records: usize,
    rms_ev: f64,
    v_ev: f64,
    v_uncertainty_ev: f64,
}

/// Fits the coupling strength to a detuning series and reports it together
/// with the residual RMS and per-record photon weights.
pub fn fit_dispersion(ctx: &Ctx, input: Option<&Path>) -> Result<(), Failure> {
    let path = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out_dir.join("fitted_series.csv"));
    let series = io::read_series_csv(&path)?;
    let osc = &ctx.config.oscillator;
    let fit = fit_coupling(
        &series,
        osc.e_x_ev,
        osc.gamma_c_ev,
        osc.gamma_x_ev,
        ctx.config.fit_mode()?,
    )?;

    let mut report = String::new();
    let _ = writeln!(
        report,
        "coupling fit over {} record(s), {} mode",
        series.len(),
        ctx.config.fit.mode
    );
    let _ = writeln!(
        report,
        "V = {:.6} eV +/- {:.6} eV",
        fit.v_ev, fit.v_uncertainty_ev
    );
    let _ = writeln!(report, "residual RMS = {:.6e} eV", fit.rms_ev);
    let _ = writeln!(report, "detuning_ev   photon_weight_u   photon_weight_l");
    for r in series.records() {
        let (w_u, w_l) = hopfield_photon_weights(r.detuning_ev, fit.v_ev)
            .map_err(|e| Failure::Analysis(e.to_string()))?;
        let _ = writeln!(report, "{:+.6}     {w_u:.6}          {w_l:.6}", r.detuning_ev);
    }
    ctx.say(&report);

    let summary = CouplingSummary {
        mode: ctx.config.fit.mode.clone(),
        records: series.len(),
        rms_ev: fit.rms_ev,
        v_ev: fit.v_ev,
        v_uncertainty_ev: fit.v_uncertainty_ev,
    };
    let mut json = serde_json::to_vec_pretty(&summary).expect("summary serializes");
    json.push(b'\n');

    let mut staging = Staging::new();
    staging.add("dispersion_report.txt", report);
    staging.add("coupling.json", json);
    ctx.commit(staging, "fit-dispersion")
}

// ---------------------------------------------------------------------------
// hopfield
// ---------------------------------------------------------------------------

/// Regresses branch strengths against photon weights, reports per-branch and
/// pooled slopes, the strength-crossing detuning if one exists, and writes
/// plot-ready (photon weight, strength) pairs.
pub fn hopfield(ctx: &Ctx, input: Option<&Path>) -> Result<(), Failure> {
    let path = input
        .map(Path::to_path_buf)
        .unwrap_or_else(|| ctx.out_dir.join("fitted_series.csv"));
    let series = io::read_series_csv(&path)?;

    // Prefer the coupling fitted by fit-dispersion when its summary is
    // already in the output directory; otherwise fall back to the config.
    let coupling_path = ctx.out_dir.join("coupling.json");
    let (v_ev, v_source) = if coupling_path.is_file() {
        let text = std::fs::read_to_string(&coupling_path)
            .map_err(|e| Failure::Io(format!("{}: {e}", coupling_path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Failure::Schema(format!("{}: {e}", coupling_path.display())))?;
        let v = value
            .get("v_ev")
            .and_then(serde_json::Value::as_f64)
            .ok_or_else(|| {
                Failure::Schema(format!("{}: no numeric v_ev", coupling_path.display()))
            })?;
        (v, "fitted")
    } else {
        (ctx.config.resolved_v_ev()?, "config")
    };

    let regression = polarscat::dispersion::hopfield_regression(&series, v_ev)?;
    let crossing = match find_crossing_detuning(&series) {
        Ok(d) => Some(d),
        Err(DispersionError::NoCrossing) => None,
        Err(e) => return Err(e.into()),
    };

    let mut plot = String::from("photon_weight,sigma,branch\n");
    for (x, y) in &regression.upper.points {
        let _ = writeln!(plot, "{x:.16e},{y:.16e},U");
    }
    for (x, y) in &regression.lower.points {
        let _ = writeln!(plot, "{x:.16e},{y:.16e},L");
    }

    let mut report = String::new();
    let _ = writeln!(
        report,
        "strength-vs-photon-weight regression, V = {v_ev:.6} eV ({v_source})"
    );
    for (name, fit) in [
        ("upper", &regression.upper.fit),
        ("lower", &regression.lower.fit),
        ("pooled", &regression.pooled),
    ] {
        let _ = writeln!(
            report,
            "  {name}: slope {:+.6}, intercept {:+.6}, R^2 {:.6}",
            fit.slope, fit.intercept, fit.r_squared
        );
    }
    match crossing {
        Some(d) => {
            let _ = writeln!(report, "  crossing_detuning_ev = {d:+.6}");
        }
        None => {
            let _ = writeln!(report, "  crossing_detuning_ev = none");
        }
    }
    ctx.say(&report);

    let mut staging = Staging::new();
    staging.add("hopfield_report.txt", report);
    staging.add("hopfield_plot.csv", plot);
    ctx.commit(staging, "hopfield")
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Runs the whole pipeline — simulate, synth-scatter, fit-spectrum,
/// fit-dispersion, hopfield — and bundles the stage reports into one file.
pub fn report(ctx: &Ctx) -> Result<(), Failure> {
    simulate(ctx)?;
    synth_scatter(ctx)?;
    fit_spectrum(ctx, None)?;
    fit_dispersion(ctx, None)?;
    hopfield(ctx, None)?;

    let mut combined = String::from("pipeline report\n===============\n\n");
    for name in ["dispersion_report.txt", "hopfield_report.txt"] {
        let path = ctx.out_dir.join(name);
        let text = std::fs::read_to_string(&path)
            .map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
        combined.push_str(&text);
        combined.push('\n');
    }
    let mut staging = Staging::new();
    staging.add("report.txt", combined);
    ctx.commit(staging, "report")
}
