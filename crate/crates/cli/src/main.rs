//! Command line front end: waveform and uplink dumps, standalone detection,
//! grant codec conformance, closed-form evaluation, and the Monte-Carlo
//! campaign drivers. Campaign-style subcommands write CSV plus a JSON
//! sidecar holding the fully resolved configuration and seed.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mamra::analytic::{
    gamma_u, min_antennas, pf_bound, required_pt, sinr_closed_form, ScaledPowerParams, SinrParams,
};
use mamra::channel::{synthesize_uplink, user_at};
use mamra::detector::{correlate, group, measure_pf_pd, profile, Correlator};
use mamra::harness::{find_min_power, run_campaign, SlotContext};
use mamra::params::{RawConfig, SystemParams};
use mamra::preamble::PreambleSet;
use mamra::rarlink::{bits_to_hex, crc5, hex_to_bits, RarPayload, ACK_BITS, PAYLOAD_BITS};
use mamra::{Cplx, RxUplink};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(name = "mamra", version, about = "Random-access link simulator and analysis toolkit")]
struct Cli {
    /// TOML configuration file; flags below override individual fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Worker threads for parallel campaigns (output is identical for any
    /// count).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Antenna count override.
    #[arg(long, global = true)]
    m: Option<usize>,
    /// Uplink power over the noise floor, in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pu_db: Option<f64>,
    /// Downlink budget over the noise floor, in dB.
    #[arg(long, global = true, allow_hyphen_values = true)]
    pt_db: Option<f64>,
    /// Receiver noise power (0 disables noise).
    #[arg(long, global = true)]
    noise_power: Option<f64>,
    /// Detection false-alarm target behind the default threshold.
    #[arg(long, global = true)]
    target_pf: Option<f64>,
    /// Repeat attempts allowed before an access attempt counts as failed.
    #[arg(long, global = true)]
    max_repeats: Option<u32>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write one preamble frame as CSV rows (t, re, im).
    DumpPreamble {
        /// Preamble index, 1-based.
        #[arg(long, default_value_t = 1)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize one uplink frame with users at fixed delays on one
    /// preamble and write it as CSV rows (m, t, re, im).
    DumpUplink {
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Comma-separated user delays in channel uses.
        #[arg(long, value_delimiter = ',')]
        taus: Vec<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run detection over a dumped uplink frame: writes per-preamble
    /// profiles (k, t, v, p) and groups (k, group, ta_hat).
    Detect {
        /// CSV produced by dump-uplink.
        #[arg(long)]
        input: PathBuf,
        /// Output prefix: writes <out>.profiles.csv and <out>.groups.csv.
        #[arg(long)]
        out: PathBuf,
    },
    /// Grant frame codec.
    Codec {
        #[command(subcommand)]
        cmd: CodecCmd,
    },
    /// Closed-form evaluations; one CSV row each.
    Analytic {
        #[command(subcommand)]
        cmd: AnalyticCmd,
    },
    /// One Monte-Carlo campaign at a fixed load.
    Simulate {
        /// Mean fresh access requests per frame.
        #[arg(long)]
        load: f64,
        #[arg(long)]
        frames: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Campaign grid over antenna counts, loads, and a power law.
    Sweep {
        #[arg(long, value_delimiter = ',')]
        m_list: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        load_list: Vec<f64>,
        #[arg(long)]
        frames: usize,
        /// How powers scale with M; `fixed` keeps the configured powers.
        #[arg(long, value_enum, default_value_t = PowerLaw::Fixed)]
        power_law: PowerLaw,
        /// Uplink energy constant: pu/sigma^2 = eu / sqrt(M) under any
        /// scaling law.
        #[arg(long, default_value_t = 0.0913)]
        eu: f64,
        /// Downlink energy constant: the budget starts at et / sqrt(m0) for
        /// the first antenna count m0 and then follows the chosen law.
        #[arg(long, default_value_t = 0.0913)]
        et: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bisect the smallest uplink power meeting a TA error-rate target.
    FindMinPower {
        #[arg(long, default_value_t = 1e-2)]
        target_pe: f64,
        /// False-alarm target for the detection threshold used inside the
        /// search (defaults to the configured one).
        #[arg(long)]
        search_pf: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure false-alarm and detection rates at the configured threshold.
    PfPd {
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum CodecCmd {
    /// Build a grant frame and print it as six hex digits.
    Encode {
        #[arg(long)]
        ta: usize,
        #[arg(long, default_value_t = 0)]
        rb_start: usize,
        #[arg(long, default_value_t = 1)]
        num_rb: usize,
    },
    /// Parse six hex digits, verify acknowledgement and CRC, print fields.
    Decode {
        #[arg(long)]
        hex: String,
    },
}

#[derive(Subcommand)]
enum AnalyticCmd {
    /// Worst-case long-term SINR for a group of kg users.
    Sinr {
        #[arg(long)]
        kg: usize,
    },
    /// Limiting SINR under the joint power scaling.
    GammaU {
        #[arg(long, default_value_t = 0.0913)]
        eu: f64,
        #[arg(long, default_value_t = 0.0913)]
        et: f64,
    },
    /// False-alarm upper bound at a given threshold multiplier.
    PfBound {
        #[arg(long)]
        kappa: f64,
    },
    /// Downlink power needed for a target SINR at the configured geometry.
    RequiredPt {
        /// Target SINR in dB.
        #[arg(long, allow_hyphen_values = true)]
        epsilon_db: f64,
        #[arg(long)]
        kg: usize,
        #[arg(long, default_value_t = 0.0913)]
        eu: f64,
    },
    /// Smallest antenna count meeting a target SINR under the power
    /// scaling.
    MinAntennas {
        #[arg(long, allow_hyphen_values = true)]
        epsilon_db: f64,
        #[arg(long)]
        kg: usize,
        #[arg(long, default_value_t = 0.0913)]
        eu: f64,
        #[arg(long, default_value_t = 0.0913)]
        et: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PowerLaw {
    /// Keep the configured pt for every M (pu still follows eu/sqrt(M)).
    Fixed,
    /// Constant downlink budget et.
    Const,
    /// Downlink budget shrinking as 1/sqrt(M).
    Invsqrt,
    /// Downlink budget shrinking as 1/M.
    Inv,
}

const CAMPAIGN_HEADER: &str = "m,load,pu_db,pt_db,avg_repeats,fail_prob,pf,pd,ci_halfwidth";

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build_global()
            .context("worker pool")?;
    }
    let params = resolve_params(&cli)?;
    match &cli.cmd {
        Cmd::DumpPreamble { k, out } => dump_preamble(&params, *k, out.as_deref()),
        Cmd::DumpUplink { k, taus, out } => {
            dump_uplink(&params, *k, taus, cli.seed, out.as_deref())
        }
        Cmd::Detect { input, out } => detect(&params, input, out),
        Cmd::Codec { cmd } => codec(cmd),
        Cmd::Analytic { cmd } => analytic(&params, cmd),
        Cmd::Simulate { load, frames, out } => simulate(&params, cli.seed, *load, *frames, out),
        Cmd::Sweep {
            m_list,
            load_list,
            frames,
            power_law,
            eu,
            et,
            out,
        } => sweep(
            &params, cli.seed, m_list, load_list, *frames, *power_law, *eu, *et, out,
        ),
        Cmd::FindMinPower {
            target_pe,
            search_pf,
            out,
        } => min_power(&params, cli.seed, *target_pe, *search_pf, out),
        Cmd::PfPd { trials, out } => pf_pd(&params, cli.seed, *trials, out),
    }
}

fn resolve_params(cli: &Cli) -> Result<SystemParams> {
    let mut raw = match &cli.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            RawConfig::from_toml(&text)?
        }
        None => RawConfig::default(),
    };
    if let Some(m) = cli.m {
        raw.num_antennas = m;
    }
    if let Some(db) = cli.pu_db {
        raw.pu_over_sigma2 = 10f64.powf(db / 10.0);
    }
    if let Some(db) = cli.pt_db {
        raw.pt_over_sigma2 = 10f64.powf(db / 10.0);
    }
    if let Some(n) = cli.noise_power {
        raw.noise_power = n;
    }
    if let Some(pf) = cli.target_pf {
        raw.target_pf = pf;
    }
    if let Some(r) = cli.max_repeats {
        raw.max_repeats = r;
    }
    Ok(SystemParams::derive(&raw)?)
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn write_sidecar(out: &Path, params: &SystemParams, seed: u64, extra: serde_json::Value) -> Result<()> {
    let sidecar = serde_json::json!({
        "params": params,
        "seed": seed,
        "run": extra,
    });
    let path = out.with_extension(match out.extension() {
        Some(ext) => format!("{}.json", ext.to_string_lossy()),
        None => "json".to_string(),
    });
    fs::write(&path, serde_json::to_string_pretty(&sidecar)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn dump_preamble(params: &SystemParams, k: usize, out: Option<&Path>) -> Result<()> {
    if k == 0 || k > params.num_preambles {
        bail!("preamble index {k} outside 1..={}", params.num_preambles);
    }
    let set = PreambleSet::new(params)?;
    let mut w = open_out(out)?;
    writeln!(w, "t,re,im")?;
    for (t, s) in set.frame(k).samples.iter().enumerate() {
        writeln!(w, "{t},{:.17e},{:.17e}", s.re, s.im)?;
    }
    Ok(())
}

fn dump_uplink(
    params: &SystemParams,
    k: usize,
    taus: &[usize],
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    if k == 0 || k > params.num_preambles {
        bail!("preamble index {k} outside 1..={}", params.num_preambles);
    }
    let tau_max = params.tau_max();
    for &tau in taus {
        if tau > tau_max {
            bail!("delay {tau} exceeds the cell maximum {tau_max}");
        }
    }
    let set = PreambleSet::new(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let users: Vec<_> = taus.iter().map(|&tau| user_at(params, k, tau, &mut rng)).collect();
    let rx = synthesize_uplink(params, &users, &set, &mut rng);
    let mut w = open_out(out)?;
    writeln!(w, "m,t,re,im")?;
    for (m, row) in rx.samples.iter().enumerate() {
        for (t, s) in row.iter().enumerate() {
            writeln!(w, "{m},{t},{:.17e},{:.17e}", s.re, s.im)?;
        }
    }
    Ok(())
}

fn read_uplink(path: &Path) -> Result<RxUplink> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut rows: Vec<(usize, usize, f64, f64)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if ln == 0 && line.trim() == "m,t,re,im" {
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            bail!("line {}: expected 4 fields, got {}", ln + 1, parts.len());
        }
        rows.push((
            parts[0].trim().parse().with_context(|| format!("line {}: antenna", ln + 1))?,
            parts[1].trim().parse().with_context(|| format!("line {}: sample", ln + 1))?,
            parts[2].trim().parse().with_context(|| format!("line {}: re", ln + 1))?,
            parts[3].trim().parse().with_context(|| format!("line {}: im", ln + 1))?,
        ));
    }
    if rows.is_empty() {
        bail!("no samples in {}", path.display());
    }
    let m = rows.iter().map(|r| r.0).max().unwrap() + 1;
    let len = rows.iter().map(|r| r.1).max().unwrap() + 1;
    if rows.len() != m * len {
        bail!("expected {} samples for {m} antennas x {len}, got {}", m * len, rows.len());
    }
    let mut samples = vec![vec![Cplx::new(0.0, 0.0); len]; m];
    for (ant, t, re, im) in rows {
        samples[ant][t] = Cplx::new(re, im);
    }
    Ok(RxUplink { samples })
}

fn detect(params: &SystemParams, input: &Path, out: &Path) -> Result<()> {
    let rx = read_uplink(input)?;
    if rx.samples.len() != params.num_antennas {
        bail!(
            "dump has {} antennas but the configuration says {}",
            rx.samples.len(),
            params.num_antennas
        );
    }
    let set = PreambleSet::new(params)?;
    let corr = Correlator::new(&set.root);
    let bank = correlate(&rx, &corr, params.guard);
    let theta0 = params.threshold();

    let profiles_path = out.with_extension("profiles.csv");
    let groups_path = out.with_extension("groups.csv");
    let mut pw = fs::File::create(&profiles_path)
        .with_context(|| format!("creating {}", profiles_path.display()))?;
    let mut gw = fs::File::create(&groups_path)
        .with_context(|| format!("creating {}", groups_path.display()))?;
    writeln!(pw, "k,t,v,p")?;
    writeln!(gw, "k,group,ta_hat")?;
    for k in 1..=params.num_preambles {
        let prof = profile(&bank, params, k, theta0);
        for t in 0..prof.v.len() {
            writeln!(pw, "{k},{t},{:.17e},{:.17e}", prof.v[t], prof.p[t])?;
        }
        for (g, grp) in group(&prof, params.delay_spread).iter().enumerate() {
            writeln!(gw, "{k},{},{}", g + 1, grp.ta_hat)?;
        }
    }
    Ok(())
}

fn codec(cmd: &CodecCmd) -> Result<()> {
    match cmd {
        CodecCmd::Encode { ta, rb_start, num_rb } => {
            let payload = RarPayload::new(*ta, *rb_start, *num_rb)?;
            let bits = mamra::rarlink::encode(&payload);
            println!("{}", bits_to_hex(&bits));
            Ok(())
        }
        CodecCmd::Decode { hex } => {
            let bits = hex_to_bits(hex, mamra::params::RAR_BITS)?;
            let ack_ones = bits[..ACK_BITS].iter().filter(|&&b| b).count();
            let body = &bits[ACK_BITS..ACK_BITS + PAYLOAD_BITS];
            let crc_ok = crc5(body) == bits[ACK_BITS + PAYLOAD_BITS..];
            let payload = RarPayload::from_bits(body);
            println!(
                "ack_ones={ack_ones},crc={},ta={},rb_start={},num_rb={}",
                if crc_ok { "ok" } else { "bad" },
                payload.ta,
                payload.rb_start,
                payload.num_rb
            );
            if !crc_ok {
                bail!("CRC mismatch");
            }
            Ok(())
        }
    }
}

fn analytic(params: &SystemParams, cmd: &AnalyticCmd) -> Result<()> {
    let alpha = params.alpha();
    match cmd {
        AnalyticCmd::Sinr { kg } => {
            if *kg == 0 {
                bail!("kg must be at least 1");
            }
            let value = sinr_closed_form(&SinrParams::worst_case(params, *kg));
            println!("op,m,kg,value,value_db");
            println!(
                "sinr,{},{kg},{value:.9},{:.4}",
                params.num_antennas,
                10.0 * value.log10()
            );
        }
        AnalyticCmd::GammaU { eu, et } => {
            let sp = ScaledPowerParams {
                e_u: *eu,
                e_t: *et,
                epsilon: 1.0,
            };
            let value = gamma_u(&sp, params, alpha);
            println!("op,eu,et,value,value_db");
            println!("gamma_u,{eu},{et},{value:.9},{:.4}", 10.0 * value.log10());
        }
        AnalyticCmd::PfBound { kappa } => {
            let value = pf_bound(*kappa, params.guard)?;
            println!("op,kappa,guard,value");
            println!("pf_bound,{kappa},{},{value:.9}", params.guard);
        }
        AnalyticCmd::RequiredPt { epsilon_db, kg, eu } => {
            let epsilon = 10f64.powf(epsilon_db / 10.0);
            let alphas = vec![alpha; *kg];
            let gd = required_pt(
                epsilon,
                params.num_antennas as f64,
                *eu,
                params,
                &alphas,
                1,
            )?;
            let pt_over_sigma2 = gd * params.n_sc as f64 / params.n_rs as f64;
            println!("op,m,kg,epsilon_db,pt_over_sigma2,pt_db");
            println!(
                "required_pt,{},{kg},{epsilon_db},{pt_over_sigma2:.9},{:.4}",
                params.num_antennas,
                10.0 * pt_over_sigma2.log10()
            );
        }
        AnalyticCmd::MinAntennas {
            epsilon_db,
            kg,
            eu,
            et,
        } => {
            let sp = ScaledPowerParams {
                e_u: *eu,
                e_t: *et,
                epsilon: 10f64.powf(epsilon_db / 10.0),
            };
            let alphas = vec![alpha; *kg];
            let res = min_antennas(&sp, params, &alphas, 1)?;
            println!("op,kg,epsilon_db,m_star,m_ceil");
            println!("min_antennas,{kg},{epsilon_db},{:.6},{}", res.m_star, res.m_ceil);
        }
    }
    Ok(())
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn campaign_row(m: usize, load: f64, pu_db: f64, pt_db: f64, met: &mamra::CampaignMetrics) -> String {
    format!(
        "{m},{load},{pu_db:.4},{pt_db:.4},{:.6},{:.6},{:.6},{:.6},{:.6}",
        met.avg_repeat_attempts, met.ra_failure_prob, met.pf, met.pd, met.repeat_ci95
    )
}

fn simulate(params: &SystemParams, seed: u64, load: f64, frames: usize, out: &Path) -> Result<()> {
    if frames == 0 {
        bail!("frames must be at least 1");
    }
    if !load.is_finite() || load <= 0.0 {
        bail!("load must be positive");
    }
    let ctx = SlotContext::new(params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let met = run_campaign(params, &ctx, load, frames, &mut rng);
    let mut w = open_out(Some(out))?;
    writeln!(w, "{CAMPAIGN_HEADER}")?;
    writeln!(
        w,
        "{}",
        campaign_row(
            params.num_antennas,
            load,
            db(params.pu_over_sigma2),
            db(params.pt_over_sigma2),
            &met
        )
    )?;
    write_sidecar(
        out,
        params,
        seed,
        serde_json::json!({
            "subcommand": "simulate",
            "load": load,
            "frames": frames,
            "resolved_ues": met.resolved_ues,
            "simulated_frames": met.frames,
            "failure_ci95": met.failure_ci95,
            "sinr_mean": met.sinr_mean,
        }),
    )
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    params: &SystemParams,
    seed: u64,
    m_list: &[usize],
    load_list: &[f64],
    frames: usize,
    law: PowerLaw,
    eu: f64,
    et: f64,
    out: &Path,
) -> Result<()> {
    if m_list.is_empty() || load_list.is_empty() {
        bail!("sweep needs at least one antenna count and one load");
    }
    if frames == 0 {
        bail!("frames must be at least 1");
    }
    // Every law anchors the downlink budget at the first antenna count, so
    // the three scalings share one starting point and differ only in slope.
    let m0 = m_list[0] as f64;
    let pt0 = et / m0.sqrt();
    let mut points: Vec<(usize, f64, SystemParams)> = Vec::new();
    for &m in m_list {
        let with_m = params.with_antennas(m)?;
        let scaled = match law {
            PowerLaw::Fixed => with_m,
            _ => {
                let pu = eu / (m as f64).sqrt();
                let pt = match law {
                    PowerLaw::Const => pt0,
                    PowerLaw::Invsqrt => pt0 * (m0 / m as f64).sqrt(),
                    PowerLaw::Inv => pt0 * m0 / m as f64,
                    PowerLaw::Fixed => unreachable!(),
                };
                with_m.with_powers(pu, pt)?
            }
        };
        for &load in load_list {
            if !load.is_finite() || load <= 0.0 {
                bail!("load must be positive");
            }
            points.push((m, load, scaled.clone()));
        }
    }

    let rows: Vec<String> = points
        .par_iter()
        .enumerate()
        .map(|(idx, (m, load, p))| -> Result<String> {
            let ctx = SlotContext::new(p)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(idx as u64);
            let met = run_campaign(p, &ctx, *load, frames, &mut rng);
            Ok(campaign_row(
                *m,
                *load,
                db(p.pu_over_sigma2),
                db(p.pt_over_sigma2),
                &met,
            ))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut w = open_out(Some(out))?;
    writeln!(w, "{CAMPAIGN_HEADER}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    write_sidecar(
        out,
        params,
        seed,
        serde_json::json!({
            "subcommand": "sweep",
            "m_list": m_list,
            "load_list": load_list,
            "frames": frames,
            "power_law": match law {
                PowerLaw::Fixed => "fixed",
                PowerLaw::Const => "const",
                PowerLaw::Invsqrt => "invsqrt",
                PowerLaw::Inv => "inv",
            },
            "eu": eu,
            "et": et,
        }),
    )
}

fn min_power(
    params: &SystemParams,
    seed: u64,
    target_pe: f64,
    search_pf: Option<f64>,
    out: &Path,
) -> Result<()> {
    if !(target_pe > 0.0 && target_pe < 1.0) {
        bail!("target_pe must lie in (0, 1)");
    }
    let pf = search_pf.unwrap_or(params.target_pf);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let found = find_min_power(params, target_pe, pf, &mut rng)
        .map_err(|e| anyhow!("power search failed: {e}"))?;
    // The search probes a 0.1 dB grid, so the found power carries half a
    // step of quantization uncertainty.
    let grid_half_step_db = 0.05;
    let mut w = open_out(Some(out))?;
    writeln!(w, "{CAMPAIGN_HEADER}")?;
    writeln!(
        w,
        "{},,{:.4},{:.4},,,{pf:.6},,{grid_half_step_db:.4}",
        params.num_antennas,
        found.pu_db,
        db(params.pt_over_sigma2),
    )?;
    write_sidecar(
        out,
        params,
        seed,
        serde_json::json!({
            "subcommand": "find-min-power",
            "target_pe": target_pe,
            "search_pf": pf,
            "pu_db": found.pu_db,
            "pu_over_sigma2": found.pu_over_sigma2,
            "measured_pe": found.measured_pe,
            "trials": found.trials,
        }),
    )
}

fn pf_pd(params: &SystemParams, seed: u64, trials: usize, out: &Path) -> Result<()> {
    if trials == 0 {
        bail!("trials must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rates = measure_pf_pd(params, trials, &mut rng);
    let mut w = open_out(Some(out))?;
    writeln!(w, "{CAMPAIGN_HEADER}")?;
    writeln!(
        w,
        "{},,{:.4},{:.4},,,{:.6},{:.6},",
        params.num_antennas,
        db(params.pu_over_sigma2),
        db(params.pt_over_sigma2),
        rates.pf,
        rates.pd_any
    )?;
    write_sidecar(
        out,
        params,
        seed,
        serde_json::json!({
            "subcommand": "pf-pd",
            "trials": trials,
            "pf": rates.pf,
            "pd_any": rates.pd_any,
            "pd_exact": rates.pd_exact,
            "theta0": params.threshold(),
        }),
    )
}
