use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use tstm::data_io::{
    apply_basal, load_checkpoint, load_corpus, load_metadata, read_archive, save_corpus,
    save_metadata, write_archive, ArchiveHeader,
};
use tstm::eval::{
    fft_feature_matrix, healthy_ranking, pool_counts, rank_score, smooth_topic_posterior,
    topic_proportion_features, word_proportion_features, word_topic_mi, RankInput,
};
use tstm::gibbs::{FixedTopics, GibbsConfig, Sample};
use tstm::model::{sample_prior_params, simulate_corpus, stabilize_words};
use tstm::observation::Mniw;
use tstm::session::{self, SessionOptions};
use tstm::{Corpus, Error, Execution, Transitions};

use crate::config::{Mode, RunConfig};

/// An error together with the process exit code it maps to.
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn validation(error: anyhow::Error) -> Self {
        Self { code: 1, error }
    }

    pub fn runtime(error: anyhow::Error) -> Self {
        Self { code: 2, error }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e.root() {
            Error::InvalidParameter(_)
            | Error::Shape(_)
            | Error::ImproperPosterior(_)
            | Error::InvalidLabel(_)
            | Error::Gap { .. }
            | Error::SeriesTooShort { .. }
            | Error::Parse { .. }
            | Error::EmptyInput(_)
            | Error::VersionMismatch { .. } => 1,
            _ => 2,
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

type Outcome = Result<(), Failure>;

fn invalid(e: anyhow::Error) -> Failure {
    Failure::validation(e)
}

fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure::runtime(e.into())
}

fn comments(cfg: &RunConfig, cmd: &str) -> Vec<String> {
    vec![format!(
        "tstm {cmd} config_sha256={} seed={}",
        cfg.hash(),
        cfg.gibbs.seed
    )]
}

fn write_text(path: &Path, comments: &[String], body: &str) -> Outcome {
    let mut text = String::new();
    for c in comments {
        let _ = writeln!(text, "# {c}");
    }
    text.push_str(body);
    fs::write(path, text)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(io)
}

fn write_run_config(cfg: &RunConfig, cmd: &str) -> Outcome {
    let body = toml::to_string(cfg).map_err(io)?;
    write_text(&cfg.paths.out.join("run.toml"), &comments(cfg, cmd), &body)
}

pub fn simulate(cfg: &RunConfig) -> Outcome {
    let hyper = cfg.hyper.to_hyper().map_err(invalid)?;
    let sim = &cfg.simulate;
    let (n, d) = (sim.n_series, hyper.n_topics);
    if sim.dim == 0 {
        return Err(invalid(anyhow!("simulate.dim must be positive")));
    }
    if n > 0 && sim.length <= hyper.ar_order {
        return Err(invalid(anyhow!(
            "simulate.length ({}) must exceed hyper.ar_order ({})",
            sim.length,
            hyper.ar_order
        )));
    }
    if let Some(g) = &sim.grades {
        if g.len() != n {
            return Err(invalid(anyhow!(
                "simulate.grades has {} entries for {n} series",
                g.len()
            )));
        }
    }
    let mut rng = tstm::dist::stream(cfg.gibbs.seed, &[]);
    let mut params = sample_prior_params(&hyper, sim.dim, &mut rng)?;
    if sim.words.is_none() {
        stabilize_words(&mut params, &hyper, 0.99, 10_000, &mut rng)
            .map_err(|e| invalid(e.into()))?;
    }
    if let Some(words) = &sim.words {
        if words.len() != hyper.n_words {
            return Err(invalid(anyhow!(
                "simulate.words has {} entries, hyper.n_words is {}",
                words.len(),
                hyper.n_words
            )));
        }
        params.words = words
            .iter()
            .enumerate()
            .map(|(i, w)| w.to_word(i))
            .collect::<anyhow::Result<_>>()
            .map_err(invalid)?;
    }
    if let Some(phi) = &sim.phi {
        params.phi = phi.clone();
    }
    if let Some(rows) = &sim.pi_g {
        params.pi_g = Transitions::from_rows(rows.clone())
            .context("simulate.pi_g")
            .map_err(invalid)?;
    }
    params
        .validate(sim.dim, hyper.ar_order)
        .context("simulated parameters")
        .map_err(invalid)?;

    let (mut corpus, mut states) =
        simulate_corpus(&params, &hyper, &vec![sim.length; n], &mut rng)?;
    if let Some(g) = &sim.grades {
        corpus.grades = g.iter().map(|&v| Some(v)).collect();
    }
    if sim.emit_labels {
        for (lab, st) in corpus.labels.iter_mut().zip(&mut states) {
            let mut mask = vec![false; d];
            st.d.iter().for_each(|&t| mask[t] = true);
            *lab = Some(mask.clone());
            st.labels = Some(mask);
        }
    }

    let out = &cfg.paths.out;
    fs::create_dir_all(out).map_err(io)?;
    let notes = comments(cfg, "simulate");
    save_corpus(&out.join("corpus.csv"), &corpus, &notes)?;
    save_metadata(&out.join("metadata.csv"), &corpus, &notes)?;
    let header = ArchiveHeader {
        n_topics: d,
        n_words: hyper.n_words,
        dim: sim.dim,
        ar_order: hyper.ar_order,
        ids: corpus.ids.clone(),
        lengths: states.iter().map(|s| s.d.len()).collect(),
    };
    let truth = Sample {
        iteration: 0,
        log_joint: 0.0,
        params,
        states,
    };
    write_archive(&out.join("truth.samples"), &header, &[truth])?;
    write_run_config(cfg, "simulate")?;
    println!("simulated {n} series into {}", out.display());
    Ok(())
}

fn load_inputs(cfg: &RunConfig, need_labels: bool) -> Result<Corpus, Failure> {
    let path = RunConfig::require("paths.corpus", &cfg.paths.corpus).map_err(invalid)?;
    let mut corpus = load_corpus(&path)?;
    if need_labels {
        let meta = RunConfig::require("paths.metadata", &cfg.paths.metadata).map_err(invalid)?;
        load_metadata(&meta, &mut corpus)?;
    } else if let Some(meta) = &cfg.paths.metadata {
        load_metadata(meta, &mut corpus)?;
    }
    if cfg.preprocess.basal_window > 0 {
        apply_basal(&mut corpus, cfg.preprocess.basal_window)?;
    }
    Ok(corpus)
}

pub fn fit(cfg: &RunConfig, resume: bool, stop_after: Option<u64>, infer: bool) -> Outcome {
    cfg.validate_gibbs().map_err(invalid)?;
    let mut hyper = cfg.hyper.to_hyper().map_err(invalid)?;
    let fixed = infer || cfg.mode == Mode::FixedTopics;
    let supervised = !fixed && cfg.mode == Mode::Supervised;
    let fixed_topics = if fixed {
        let path = RunConfig::require("paths.topics", &cfg.paths.topics).map_err(invalid)?;
        let ckpt = load_checkpoint(&path)?;
        Some(FixedTopics::from(&ckpt.chain.params))
    } else {
        None
    };
    let corpus = load_inputs(cfg, supervised)?;
    if cfg.hyper.data_scaled_prior {
        hyper.mniw_prior = Some(Mniw::data_scaled(&corpus.residuals, hyper.ar_order)?);
    }
    let g = &cfg.gibbs;
    let config = GibbsConfig {
        n_iter: g.n_iter,
        burn_in: g.burn_in,
        thin: g.thin,
        n_chains: g.n_chains,
        seed: g.seed,
        supervised,
        fixed_topics,
        execution: if g.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
    };
    let opts = SessionOptions {
        checkpoint_every: g.checkpoint_every,
        resume,
        stop_after,
    };
    let out = &cfg.paths.out;
    fs::create_dir_all(out).map_err(io)?;
    let cmd = if infer { "infer" } else { "fit" };
    write_run_config(cfg, cmd)?;
    for r in session::fit(&corpus, &hyper, &config, out, &opts)? {
        let state = if r.finished { "done" } else { "stopped" };
        match r.resumed_from {
            Some(k) => println!(
                "chain {}: {state} at iteration {} (resumed from {k})",
                r.chain, r.iteration
            ),
            None => println!("chain {}: {state} at iteration {}", r.chain, r.iteration),
        }
    }
    Ok(())
}

fn chain_archives(out: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut found: Vec<(u64, PathBuf)> = Vec::new();
    for entry in fs::read_dir(out)
        .with_context(|| format!("reading {}", out.display()))
        .map_err(invalid)?
    {
        let path = entry.map_err(io)?.path();
        let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("");
        if let Some(k) = name
            .strip_prefix("chain")
            .and_then(|s| s.strip_suffix(".samples"))
        {
            if let Ok(k) = k.parse() {
                found.push((k, path));
            }
        }
    }
    found.sort();
    Ok(found.into_iter().map(|(_, p)| p).collect())
}

fn float(v: f64) -> String {
    if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.to_string()
    }
}

fn matrix_csv(ids: &[String], prefix: &str, rows: &[Vec<f64>]) -> String {
    let k = rows.first().map_or(0, Vec::len);
    let mut s = String::from("series_id");
    for j in 0..k {
        let _ = write!(s, ",{prefix}{j}");
    }
    s.push('\n');
    for (id, row) in ids.iter().zip(rows) {
        s.push_str(id);
        for v in row {
            let _ = write!(s, ",{}", float(*v));
        }
        s.push('\n');
    }
    s
}

pub fn evaluate(cfg: &RunConfig) -> Outcome {
    let out = &cfg.paths.out;
    let paths = if cfg.paths.archives.is_empty() {
        chain_archives(out)?
    } else {
        cfg.paths.archives.clone()
    };
    if paths.is_empty() {
        return Err(invalid(anyhow!(
            "no sample archives in {} and paths.archives is empty",
            out.display()
        )));
    }
    let archives = paths
        .iter()
        .map(|p| read_archive(p).with_context(|| format!("reading {}", p.display())))
        .collect::<anyhow::Result<Vec<_>>>()
        .map_err(io)?;
    let header = archives[0].header.clone();
    if archives.iter().any(|a| a.header != header) {
        return Err(invalid(anyhow!(
            "archives were written for different corpora"
        )));
    }
    let samples: Vec<&Sample> = archives.iter().flat_map(|a| &a.samples).collect();
    if samples.is_empty() {
        return Err(invalid(anyhow!("archives hold no samples")));
    }
    let ev = &cfg.evaluate;
    if ev.healthy_topic >= header.n_topics {
        return Err(invalid(anyhow!(
            "evaluate.healthy_topic ({}) must be below the number of topics ({})",
            ev.healthy_topic,
            header.n_topics
        )));
    }
    fs::create_dir_all(out).map_err(io)?;
    let notes = comments(cfg, "evaluate");
    let ids = &header.ids;

    let topics = topic_proportion_features(samples.iter().copied(), header.n_topics)?;
    write_text(
        &out.join("topic_features.csv"),
        &notes,
        &matrix_csv(ids, "topic", &topics),
    )?;
    let words = word_proportion_features(samples.iter().copied(), header.n_words)?;
    write_text(
        &out.join("word_features.csv"),
        &notes,
        &matrix_csv(ids, "word", &words),
    )?;

    let counts = pool_counts(samples.iter().copied(), header.n_topics, header.n_words);
    let mi = word_topic_mi(&counts, header.n_topics, header.n_words)?;
    let mut body = String::from("word,topic,count,pmi,p_topic_given_word\n");
    for l in 0..header.n_words {
        for d in 0..header.n_topics {
            let _ = writeln!(
                body,
                "{l},{d},{},{},{}",
                counts[d * header.n_words + l],
                float(mi.pmi[l][d]),
                float(mi.topic_given_word[l][d])
            );
        }
    }
    write_text(&out.join("mi.csv"), &notes, &body)?;

    let mut body = String::from("series_id,t,posterior,smoothed\n");
    for (i, id) in ids.iter().enumerate() {
        let curve = smooth_topic_posterior(
            samples.iter().copied(),
            i,
            ev.healthy_topic,
            ev.smooth_window,
        )?;
        for (t, (p, s)) in curve.posterior.iter().zip(&curve.smoothed).enumerate() {
            let _ = writeln!(body, "{id},{t},{p},{s}");
        }
    }
    write_text(&out.join("posterior.csv"), &notes, &body)?;

    let mut graded = Corpus {
        ids: ids.clone(),
        grades: vec![None; ids.len()],
        labels: vec![None; ids.len()],
        ..Corpus::default()
    };
    if let Some(corpus_path) = &cfg.paths.corpus {
        let mut corpus = load_corpus(corpus_path)?;
        if cfg.preprocess.basal_window > 0 {
            apply_basal(&mut corpus, cfg.preprocess.basal_window)?;
        }
        let fft = fft_feature_matrix(&corpus.residuals, &ev.periods)?;
        let m = corpus.dim().unwrap_or(1);
        let mut body = String::from("series_id");
        for c in 1..=m {
            for v in &ev.periods {
                let _ = write!(body, ",ch{c}_period{v}");
            }
        }
        body.push('\n');
        for (id, row) in corpus.ids.iter().zip(&fft) {
            body.push_str(id);
            row.iter().for_each(|v| {
                let _ = write!(body, ",{v}");
            });
            body.push('\n');
        }
        write_text(&out.join("fft_features.csv"), &notes, &body)?;
    }
    if let Some(meta) = &cfg.paths.metadata {
        load_metadata(meta, &mut graded)?;
    }

    let ranking = healthy_ranking(samples.iter().copied(), ev.healthy_topic)?;
    let with_grade: Vec<usize> = (0..ids.len())
        .filter(|&i| graded.grades[i].is_some())
        .collect();
    if with_grade.is_empty() {
        eprintln!("error: rank score not computed: no grades (set paths.metadata)");
        return Ok(());
    }
    // ranks restricted to graded series, keeping the frequency/ingestion order
    let mut order = with_grade.clone();
    order.sort_by(|&a, &b| {
        ranking.frequency[a]
            .total_cmp(&ranking.frequency[b])
            .then(a.cmp(&b))
    });
    let mut rank = vec![0; ids.len()];
    for (pos, &i) in order.iter().enumerate() {
        rank[i] = pos + 1;
    }
    let input = RankInput::new(
        with_grade.iter().map(|&i| rank[i]).collect(),
        with_grade
            .iter()
            .map(|&i| graded.grades[i].unwrap_or_default())
            .collect(),
    )?;
    let score = rank_score(&input);
    let percent = score.percent.map_or("nan".to_string(), |p| p.to_string());
    let mut body = format!(
        "score {}\nmax {}\npercent {percent}\nseries {}\n",
        score.score,
        score.max,
        input.len()
    );
    body.push_str("series_id,healthy_frequency,rank,grade\n");
    for &i in &with_grade {
        let _ = writeln!(
            body,
            "{},{},{},{}",
            ids[i],
            ranking.frequency[i],
            rank[i],
            graded.grades[i].unwrap_or_default()
        );
    }
    write_text(&out.join("rank_score.txt"), &notes, &body)?;
    println!("rank score {} of {} ({percent}%)", score.score, score.max);
    Ok(())
}
