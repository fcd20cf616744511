use std::collections::BTreeMap;
use std::path::Path;

use canonlab_core::canon::{canonicalize_dataset, Canonicalizer};
use canonlab_core::corpus::{
    generate_paraphrases, generate_synthetic, load_jsonl, match_paired_motions, to_jsonl_string, Dataset,
    ParaphraseRegistry,
};
use canonlab_core::eval::{evaluate, report_row, RetrievalReport, SimProvider, TextMode, REPORT_CSV_HEADER};
use canonlab_core::lingstats::{collision_benignity, collision_groups, length_gain, pos_survival, strip_inventory};
use canonlab_core::model::{initial_checkpoint, train_from, Checkpoint, TrainInputs};
use canonlab_core::noiselab::{concentration, cross_alignment, geometry, gradient_variance, variance_report};
use serde::Serialize;

use crate::config::{RunConfig, SplitSel};
use crate::error::CliError;
use crate::manifest::{write_atomic, RunDir};

pub const CHECKPOINT_FILE: &str = "checkpoint.json";

struct Data {
    ds: Dataset,
    paraphrases: Option<ParaphraseRegistry>,
}

fn load_data(cfg: &RunConfig, run: &mut RunDir) -> Result<Data, CliError> {
    let ds = match (&cfg.data.path, &cfg.data.synth) {
        (Some(path), _) => {
            run.input(path)?;
            load_jsonl(path)?
        }
        (None, Some(spec)) => generate_synthetic(spec)?,
        (None, None) => return Err(CliError::config("data: one of path or synth is required")),
    };
    let paraphrases = match (&cfg.data.paraphrases, &cfg.data.synth) {
        (Some(path), _) => {
            run.input(path)?;
            Some(ParaphraseRegistry::load(path)?)
        }
        (None, Some(spec)) if cfg.data.paraphrase_count > 0 => {
            Some(generate_paraphrases(&ds, spec, cfg.data.paraphrase_count, spec.seed))
        }
        _ => None,
    };
    Ok(Data { ds, paraphrases })
}

fn select(ds: &Dataset, split: SplitSel) -> Result<Dataset, CliError> {
    let out = match split.split() {
        Some(s) => ds.subset(s),
        None => ds.clone(),
    };
    if out.motions().is_empty() {
        return Err(CliError::data(format!("split {split:?} is empty")));
    }
    Ok(out)
}

fn canonicalizer(cfg: &RunConfig, purpose: &str) -> Result<Canonicalizer, CliError> {
    cfg.canonicalizer
        .as_ref()
        .ok_or_else(|| CliError::config(format!("{purpose} needs a [canonicalizer] block")))?
        .build()
}

fn input_canon_cache(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    use crate::config::CanonConfig;
    if let Some(CanonConfig::Cached { cache } | CanonConfig::Remote { cache, .. }) = &cfg.canonicalizer {
        if cache.exists() {
            run.input(cache)?;
        }
    }
    Ok(())
}

fn load_checkpoint(path: &Path, run: &mut RunDir) -> Result<Checkpoint, CliError> {
    run.input(path)?;
    Ok(Checkpoint::load(path)?)
}

pub fn synth(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    if cfg.data.synth.is_none() {
        return Err(CliError::config("synth needs a [data.synth] block"));
    }
    let data = load_data(cfg, run)?;
    run.write("dataset.jsonl", to_jsonl_string(&data.ds).as_bytes())?;
    if let Some(reg) = &data.paraphrases {
        run.write("paraphrases.jsonl", reg.to_jsonl_string().as_bytes())?;
    }
    Ok(())
}

#[derive(Serialize)]
struct Uniqueness {
    n_motions: usize,
    /// Motions whose captions all map to one canonical string.
    n_single_canonical: usize,
    n_collision_groups: usize,
    collision_groups: Vec<canonlab_core::lingstats::CollisionGroup>,
}

pub fn canon(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let c = canonicalizer(cfg, "canon")?;
    input_canon_cache(cfg, run)?;
    let data = load_data(cfg, run)?;
    let (canon_ds, stats) = canonicalize_dataset(&data.ds, &c)?;
    run.write("canonical.jsonl", to_jsonl_string(&canon_ds).as_bytes())?;
    run.write_json("modification_stats.json", &stats)?;
    let single = (0..canon_ds.motions().len())
        .filter(|&m| {
            let mut texts: Vec<&str> = canon_ds.captions_of(m).map(|c| c.text.as_str()).collect();
            texts.dedup();
            texts.len() == 1
        })
        .count();
    let groups = collision_groups(&canon_ds);
    run.write_json(
        "uniqueness.json",
        &Uniqueness {
            n_motions: canon_ds.motions().len(),
            n_single_canonical: single,
            n_collision_groups: groups.len(),
            collision_groups: groups,
        },
    )?;
    Ok(())
}

pub fn train(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let tc = cfg
        .train
        .as_ref()
        .ok_or_else(|| CliError::config("train needs a [train] block"))?;
    let canon = if tc.mode.needs_canonicalizer() {
        input_canon_cache(cfg, run)?;
        Some(canonicalizer(cfg, "this training mode")?)
    } else {
        None
    };
    let data = load_data(cfg, run)?;
    let mut inputs = TrainInputs::new(&data.ds);
    if let Some(c) = &canon {
        inputs = inputs.with_canonicalizer(c);
    }
    if let Some(p) = &data.paraphrases {
        inputs = inputs.with_paraphrases(p);
    }
    let ckpt_path = run.path(CHECKPOINT_FILE);
    let start = if ckpt_path.exists() {
        let ck = Checkpoint::load(&ckpt_path)?;
        if &ck.config != tc {
            return Err(CliError::data(format!(
                "{} was written with a different training config",
                ckpt_path.display()
            )));
        }
        ck
    } else {
        initial_checkpoint(tc, &data.ds, canon.as_ref().map(Canonicalizer::kind))?
    };
    let dir = run.dir.clone();
    let save = |ck: &Checkpoint| -> Result<(), CliError> {
        write_atomic(&dir.join(CHECKPOINT_FILE), ck.to_json_string().as_bytes())?;
        write_atomic(&dir.join("loss.csv"), ck.loss_csv().as_bytes())
    };
    save(&start)?;
    let mut failed = None;
    let done = train_from(start, &inputs, |ck| {
        save(ck).map_err(|e| {
            let msg = e.to_string();
            failed = Some(e);
            canonlab_core::Error::Integrity(msg)
        })
    });
    if let Some(e) = failed {
        return Err(e);
    }
    let done = done?;
    run.write(CHECKPOINT_FILE, done.to_json_string().as_bytes())?;
    run.write("loss.csv", done.loss_csv().as_bytes())?;
    Ok(())
}

pub fn eval(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let ec = cfg
        .eval
        .as_ref()
        .ok_or_else(|| CliError::config("eval needs an [eval] block"))?;
    let canon = match ec.text_mode {
        TextMode::Canonical => {
            input_canon_cache(cfg, run)?;
            Some(canonicalizer(cfg, "canonical text mode")?)
        }
        TextMode::Original => None,
    };
    if let Some(SimProvider::Precomputed { path }) = &ec.protocol.sim_provider {
        run.input(path)?;
    }
    let ckpt = load_checkpoint(&ec.checkpoint, run)?;
    let data = load_data(cfg, run)?;
    let ds = select(&data.ds, ec.split)?;
    let (t2m, m2t) = evaluate(&ckpt, &ds, &ec.protocol, ec.text_mode, canon.as_ref())?;
    run.write_json("t2m.json", &t2m)?;
    run.write_json("m2t.json", &m2t)?;
    run.write(
        "retrieval.csv",
        format!("{REPORT_CSV_HEADER}\n{}\n", report_row(&t2m, &m2t)).as_bytes(),
    )?;
    Ok(())
}

fn csv(header: &str, row: String) -> String {
    format!("{header}\n{row}\n")
}

pub fn noise(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let nc = cfg
        .noise
        .as_ref()
        .ok_or_else(|| CliError::config("noise needs a [noise] block"))?;
    let canon = canonicalizer(cfg, "noise")?;
    input_canon_cache(cfg, run)?;
    let ckpt = load_checkpoint(&nc.checkpoint, run)?;
    let data = load_data(cfg, run)?;
    let ds = select(&data.ds, nc.split)?;

    let var = variance_report(&ckpt, &ds, &canon)?;
    run.write_json("variance.json", &var)?;
    run.write("variance.csv", csv(canonlab_core::noiselab::VarianceReport::CSV_HEADER, var.csv_row()).as_bytes())?;

    let grad = gradient_variance(&ckpt, &ds, &canon)?;
    run.write_json("gradient_variance.json", &grad)?;
    run.write(
        "gradient_variance.csv",
        csv(canonlab_core::noiselab::GradVarReport::CSV_HEADER, grad.csv_row()).as_bytes(),
    )?;

    let mut conc = BTreeMap::new();
    conc.insert("original", concentration(&ckpt, &ds, None)?);
    conc.insert("canonical", concentration(&ckpt, &ds, Some(&canon))?);
    run.write_json("concentration.json", &conc)?;
    let mut geo = BTreeMap::new();
    geo.insert("original", geometry(&ckpt, &ds, None)?);
    geo.insert("canonical", geometry(&ckpt, &ds, Some(&canon))?);
    run.write_json("geometry.json", &geo)?;
    let mut rows = String::from("text,");
    rows.push_str(canonlab_core::noiselab::GeometryReport::CSV_HEADER);
    rows.push('\n');
    for (k, g) in &geo {
        rows.push_str(&format!("{k},{}\n", g.csv_row()));
    }
    run.write("geometry.csv", rows.as_bytes())?;

    if let Some(other) = &nc.pair_with {
        run.input(other)?;
        let b = load_jsonl(other)?;
        let pairs = match_paired_motions(&ds, &b);
        let align = cross_alignment(&ckpt, &pairs, &ds, &b, &canon)?;
        run.write_json("alignment.json", &align)?;
        run.write(
            "alignment.csv",
            csv(canonlab_core::noiselab::AlignmentReport::CSV_HEADER, align.csv_row()).as_bytes(),
        )?;
    }
    Ok(())
}

fn load_report(path: &Path, run: &mut RunDir) -> Result<RetrievalReport, CliError> {
    run.input(path)?;
    let body = std::fs::read_to_string(path).map_err(|e| CliError::data(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&body).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn ling(cfg: &RunConfig, run: &mut RunDir) -> Result<(), CliError> {
    let lc = cfg.ling.clone().unwrap_or_default();
    let canon = canonicalizer(cfg, "ling")?;
    input_canon_cache(cfg, run)?;
    let data = load_data(cfg, run)?;
    let ds = select(&data.ds, lc.split)?;
    let wl = canon.wordlists();
    let (canon_ds, _) = canonicalize_dataset(&ds, &canon)?;
    let orig: Vec<&str> = ds.captions().iter().map(|c| c.text.as_str()).collect();
    let canon_texts: Vec<&str> = canon_ds.captions().iter().map(|c| c.text.as_str()).collect();

    let survival = pos_survival(&orig, &canon_texts, &wl)?;
    run.write_json("survival.json", &survival)?;
    run.write(
        "survival.csv",
        csv(&canonlab_core::lingstats::SurvivalReport::csv_header(), survival.csv_row()).as_bytes(),
    )?;
    run.write_json("strip_inventory.json", &strip_inventory(&orig, &canon_texts, &wl, lc.top_k)?)?;

    let groups = collision_groups(&canon_ds);
    let provider = lc.sim_provider.clone().unwrap_or(SimProvider::TfidfCosine);
    if let SimProvider::Precomputed { path } = &provider {
        run.input(path)?;
    }
    let benign = collision_benignity(&ds, &groups, &provider, &lc.thresholds)?;
    run.write_json("collisions.json", &benign)?;
    run.write("collisions.csv", csv(&benign.csv_header(), benign.csv_row()).as_bytes())?;

    match (&lc.base_report, &lc.treat_report) {
        (Some(b), Some(t)) => {
            let base = load_report(b, run)?;
            let treat = load_report(t, run)?;
            let gain = length_gain(&base, &treat, &ds)?;
            run.write_json("length_gain.json", &gain)?;
            run.write("length_gain.csv", gain.csv().as_bytes())?;
        }
        (None, None) => {}
        _ => return Err(CliError::config("ling: base_report and treat_report go together")),
    }
    Ok(())
}
