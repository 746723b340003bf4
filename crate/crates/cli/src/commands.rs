use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;

use aud_core::corpus::{load_corpus, load_labels, preprocess, FeatureSequence, Manifest, PreprocessOptions};
use aud_core::decode::{format_alignments, format_lattices, parse_alignments, viterbi_decode, AlignmentFile};
use aud_core::evaluation::evaluate_units;
use aud_core::inference::train_with_observer;
use aud_core::model::{read_model, ExpectedParams, ModelFile};
use aud_core::prior::read_prior;
use aud_core::wordseg::{
    evaluate_words, format_segmentations, gibbs_segment_with_observer, parse_segmentations, LevelParams, UnitSequence,
};
use aud_core::{
    emit_lattice, fit_informative_prior, init_posterior, seed_from_prior, AudError, DataSummary, GibbsParams,
    HyperParams, PhoneLoopPosterior, Schedule,
};

use crate::output::{write_atomic, RunManifest};
use crate::{
    require_file, require_out_dir, Cli, Command, DecodeArgs, EvalUnitsArgs, EvalWordsArgs, Failure, FeatureArgs,
    PriorFitArgs, ScheduleArgs, SegmentArgs, TrainArgs,
};

type CmdResult = Result<(), Failure>;

pub fn dispatch(cli: &Cli, argv: &[String]) -> CmdResult {
    let log = Log { quiet: cli.quiet };
    match &cli.command {
        Command::Train(a) => train(a, argv, log),
        Command::PriorFit(a) => prior_fit(a, argv, log),
        Command::Decode(a) => decode(a, argv, log),
        Command::EvalUnits(a) => eval_units(a, argv),
        Command::Segment(a) => segment(a, argv, log),
        Command::EvalWords(a) => eval_words(a, argv),
    }
}

#[derive(Clone, Copy)]
struct Log {
    quiet: bool,
}

impl Log {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, Failure> {
    if workers == Some(0) {
        return Err(Failure::Usage("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .map_err(|e| Failure::Run(AudError::InternalState(format!("cannot start worker threads: {e}"))))
}

fn check_schedule(s: &ScheduleArgs) -> CmdResult {
    if !(s.tol >= 0.0 && s.tol.is_finite()) {
        return Err(Failure::Usage(format!("--tol must be a non-negative number, got {}", s.tol)));
    }
    Ok(())
}

fn check_tolerance(tol_ms: f64) -> CmdResult {
    if !(tol_ms >= 0.0 && tol_ms.is_finite()) {
        return Err(Failure::Usage(format!("--tol-ms must be a non-negative number, got {tol_ms}")));
    }
    Ok(())
}

fn with_suffix(p: &Path, suffix: &str) -> PathBuf {
    let mut name = p.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    p.with_file_name(name)
}

fn preprocess_options(f: &FeatureArgs) -> PreprocessOptions {
    PreprocessOptions { mean_normalize: f.mean_norm, deltas: f.deltas }
}

fn load_features(path: &Path, opts: PreprocessOptions) -> aud_core::Result<(Manifest, Vec<FeatureSequence>)> {
    let (m, feats) = load_corpus(path)?;
    if feats.is_empty() {
        return Err(AudError::Data(format!("manifest {} lists no utterances", path.display())));
    }
    let feats = feats.iter().map(|f| preprocess(f, opts)).collect();
    Ok((m, feats))
}

fn read_text(p: &Path) -> aud_core::Result<String> {
    fs::read_to_string(p).map_err(|e| AudError::io(p, e))
}

fn read_alignments(p: &Path) -> aud_core::Result<(AlignmentFile, f64)> {
    let file = parse_alignments(&read_text(p)?)?;
    let shift = file.frame_shift_ms()?;
    Ok((file, shift))
}

fn train(a: &TrainArgs, argv: &[String], log: Log) -> CmdResult {
    require_file("manifest", &a.manifest)?;
    if let Some(p) = &a.prior {
        require_file("prior", p)?;
    }
    require_out_dir("out", &a.out)?;
    check_schedule(&a.schedule)?;
    let elbo_log = a.elbo_log.clone().unwrap_or_else(|| with_suffix(&a.out, ".elbo.tsv"));
    require_out_dir("elbo-log", &elbo_log)?;
    let opts = preprocess_options(&a.features);
    let seed = a.schedule.seed;

    pool(a.schedule.workers)?.install(|| {
        let (manifest, feats) = load_features(&a.manifest, opts)?;
        let summary = DataSummary::from_corpus(&feats)?;
        let hyper = HyperParams { n_units: a.k, n_components: a.m, gamma: a.gamma, seed, ..Default::default() }
            .with_vague_prior(&summary)?;
        hyper.validate()?;
        let (prior, init) = match &a.prior {
            Some(path) => {
                let p = read_prior(path)?;
                if p.hyper.dim() != hyper.dim() {
                    return Err(Failure::Run(AudError::Shape(format!(
                        "prior {} has dimension {} but the features have {}; use the same --mean-norm/--deltas as prior-fit",
                        path.display(),
                        p.hyper.dim(),
                        hyper.dim()
                    ))));
                }
                log.say(format!("informative prior: {} phones, {} vague units", p.n_phones(), a.k.saturating_sub(p.n_phones())));
                seed_from_prior(&p, &hyper)?
            }
            None => (PhoneLoopPosterior::prior(&hyper)?, init_posterior(&hyper, &summary, seed)?),
        };
        log.say(format!(
            "training on {} utterances, K={} M={} dim={}",
            feats.len(),
            a.k,
            a.m,
            hyper.dim()
        ));

        let schedule = Schedule { max_epochs: a.schedule.epochs, rel_tol: a.schedule.tol };
        let mut elbo_text = String::from("epoch\telbo\telapsed_s\n");
        let out = train_with_observer(&feats, &prior, &init, &schedule, |r| {
            let _ = writeln!(elbo_text, "{}\t{:.10e}\t{:.3}", r.epoch, r.elbo, r.elapsed_s);
            log.say(format!("epoch {:>3}  elbo {:.6e}", r.epoch, r.elbo));
        })?;

        let mut model = ModelFile::new(out.posterior);
        model.meta = vec![
            ("frame_shift_ms".into(), manifest.frame_shift_ms.to_string()),
            ("mean_norm".into(), opts.mean_normalize.to_string()),
            ("deltas".into(), opts.deltas.to_string()),
            ("seed".into(), seed.to_string()),
            ("epochs".into(), (out.elbo_trace.len() - 1).to_string()),
            ("converged".into(), out.converged.to_string()),
        ];
        write_atomic(&a.out, model.to_text().as_bytes())?;
        write_atomic(&elbo_log, elbo_text.as_bytes())?;

        let mut run = RunManifest::new(
            "train",
            argv,
            json!({
                "K": a.k, "M": a.m, "gamma": a.gamma,
                "epochs": a.schedule.epochs, "tol": a.schedule.tol,
                "mean_norm": opts.mean_normalize, "deltas": opts.deltas,
                "prior": a.prior.is_some(),
            }),
        )
        .seed(seed)
        .input(&a.manifest);
        if let Some(p) = &a.prior {
            run = run.input(p);
        }
        run.output(&a.out).output(&elbo_log).write()?;
        log.say(format!(
            "wrote {} ({} epochs, {})",
            a.out.display(),
            out.elbo_trace.len() - 1,
            if out.converged { "converged" } else { "epoch limit reached" }
        ));
        Ok(())
    })
}

fn prior_fit(a: &PriorFitArgs, argv: &[String], log: Log) -> CmdResult {
    require_file("manifest", &a.manifest)?;
    require_file("labels", &a.labels)?;
    require_out_dir("out", &a.out)?;
    check_schedule(&a.schedule)?;
    let opts = preprocess_options(&a.features);
    let seed = a.schedule.seed;

    pool(a.schedule.workers)?.install(|| {
        let (_, feats) = load_features(&a.manifest, opts)?;
        let labels = load_labels(&a.labels)?;
        let mut by_utt: HashMap<String, _> = labels.into_iter().map(|l| (l.utt_id.clone(), l)).collect();
        let labeled = feats
            .into_iter()
            .map(|f| match by_utt.remove(&f.utt_id) {
                Some(l) => Ok((f, l)),
                None => Err(AudError::Data(format!("utterance {} has no labels in {}", f.utt_id, a.labels.display()))),
            })
            .collect::<aud_core::Result<Vec<_>>>()?;
        let phones: BTreeSet<&str> = labeled.iter().flat_map(|(_, l)| l.entries.iter().map(|e| e.label.as_str())).collect();
        if let Some(k) = a.k {
            if k < phones.len() {
                return Err(Failure::Usage(format!(
                    "the labels contain {} phones but --K is {k}; raise K to at least {}",
                    phones.len(),
                    phones.len()
                )));
            }
        }
        let features: Vec<FeatureSequence> = labeled.iter().map(|(f, _)| f.clone()).collect();
        let summary = DataSummary::from_corpus(&features)?;
        let hyper = HyperParams { n_units: phones.len().max(1), n_components: a.m, seed, ..Default::default() }
            .with_vague_prior(&summary)?;
        hyper.validate()?;
        log.say(format!("fitting {} phones on {} utterances", phones.len(), labeled.len()));
        let schedule = Schedule { max_epochs: a.schedule.epochs, rel_tol: a.schedule.tol };
        let prior = fit_informative_prior(&labeled, &hyper, &schedule)?;
        for (i, v) in prior.elbo_trace.iter().enumerate() {
            log.say(format!("iteration {i:>3}  elbo {v:.6e}"));
        }
        write_atomic(&a.out, prior.to_text().as_bytes())?;
        RunManifest::new(
            "prior-fit",
            argv,
            json!({
                "M": a.m, "K": a.k, "epochs": a.schedule.epochs, "tol": a.schedule.tol,
                "mean_norm": opts.mean_normalize, "deltas": opts.deltas,
                "phones": prior.label_order,
            }),
        )
        .seed(seed)
        .input(&a.manifest)
        .input(&a.labels)
        .output(&a.out)
        .write()?;
        log.say(format!("wrote {}", a.out.display()));
        Ok(())
    })
}

fn meta_flag(model: &ModelFile, key: &str) -> aud_core::Result<bool> {
    match model.meta(key) {
        None | Some("false") => Ok(false),
        Some("true") => Ok(true),
        Some(v) => Err(AudError::format(format!("meta {key}"), format!("expected true or false, got {v:?}"))),
    }
}

fn decode(a: &DecodeArgs, argv: &[String], log: Log) -> CmdResult {
    require_file("model", &a.model)?;
    require_file("manifest", &a.manifest)?;
    require_out_dir("align-out", &a.align_out)?;
    if let Some(p) = &a.lattice_out {
        require_out_dir("lattice-out", p)?;
    }
    if !(a.beam > 0.0) {
        return Err(Failure::Usage(format!("--beam must be positive, got {}", a.beam)));
    }

    pool(a.workers)?.install(|| {
        let model = read_model(&a.model)?;
        let opts = PreprocessOptions { mean_normalize: meta_flag(&model, "mean_norm")?, deltas: meta_flag(&model, "deltas")? };
        let (manifest, feats) = load_features(&a.manifest, opts)?;
        let post = &model.posterior;
        if let Some(f) = feats.iter().find(|f| f.dim() != post.dim()) {
            return Err(Failure::Run(AudError::Shape(format!(
                "utterance {}: features have dimension {} but the model expects {}",
                f.utt_id,
                f.dim(),
                post.dim()
            ))));
        }
        let ep = ExpectedParams::new(post);
        let aligns = feats
            .par_iter()
            .map(|f| viterbi_decode(&ep, f).map(|(al, _)| al).map_err(|e| e.for_utterance(&f.utt_id)))
            .collect::<aud_core::Result<Vec<_>>>()?;
        let header = [("frame_shift_ms", manifest.frame_shift_ms.to_string()), ("seed", post.hyper.seed.to_string())];
        write_atomic(&a.align_out, format_alignments(&aligns, &header).as_bytes())?;

        let mut run = RunManifest::new("decode", argv, json!({ "beam": a.beam, "lattices": a.lattice_out.is_some() }))
            .seed(post.hyper.seed)
            .input(&a.model)
            .input(&a.manifest)
            .output(&a.align_out);
        if let Some(p) = &a.lattice_out {
            let lattices = feats
                .par_iter()
                .map(|f| emit_lattice(&ep, f, a.beam).map_err(|e| e.for_utterance(&f.utt_id)))
                .collect::<aud_core::Result<Vec<_>>>()?;
            let mut text = String::new();
            for (k, v) in &header {
                let _ = writeln!(text, "#{k}={v}");
            }
            text.push_str(&format_lattices(&lattices));
            write_atomic(p, text.as_bytes())?;
            run = run.output(p);
        }
        run.write()?;
        log.say(format!(
            "decoded {} utterances into {} segments",
            aligns.len(),
            aligns.iter().map(|a| a.segments.len()).sum::<usize>()
        ));
        Ok(())
    })
}

fn eval_units(a: &EvalUnitsArgs, argv: &[String]) -> CmdResult {
    require_file("align", &a.align)?;
    require_file("ref-phones", &a.ref_phones)?;
    require_out_dir("report", &a.report)?;
    check_tolerance(a.tol_ms)?;
    let (file, shift) = read_alignments(&a.align)?;
    let refs = load_labels(&a.ref_phones)?;
    let report = evaluate_units(&file.alignments, &refs, shift, a.tol_ms)?;
    write_atomic(&a.report, report.to_tsv(a.per_utt).as_bytes())?;
    RunManifest::new("eval-units", argv, json!({ "tol_ms": a.tol_ms, "per_utt": a.per_utt }))
        .input(&a.align)
        .input(&a.ref_phones)
        .output(&a.report)
        .write()?;
    print!("{}", report.summary());
    Ok(())
}

fn segment(a: &SegmentArgs, argv: &[String], log: Log) -> CmdResult {
    require_file("align", &a.align)?;
    require_out_dir("out", &a.out)?;
    if !(a.d >= 0.0 && a.d < 1.0) || !(a.theta > -a.d && a.theta.is_finite()) {
        return Err(Failure::Usage(format!("need 0 <= d < 1 and theta > -d, got d={} theta={}", a.d, a.theta)));
    }
    if !(a.pstop > 0.0 && a.pstop < 1.0) {
        return Err(Failure::Usage(format!("--pstop must lie in (0, 1), got {}", a.pstop)));
    }
    let (file, shift) = read_alignments(&a.align)?;
    let corpus: Vec<UnitSequence> = file.alignments.iter().map(UnitSequence::from).collect();
    let params = GibbsParams {
        levels: LevelParams { d_bigram: a.d, theta_bigram: a.theta, d_unigram: a.d, theta_unigram: a.theta },
        p_stop: a.pstop,
        max_word_len: a.max_word_len,
        sweeps: a.sweeps,
        seed: a.seed,
        anneal: a.anneal,
        alphabet_size: None,
    };
    let every = (a.sweeps / 10).max(1);
    let (segs, state) = gibbs_segment_with_observer(&corpus, &params, |sweep, st| {
        if sweep % every == 0 || sweep == a.sweeps {
            log.say(format!("sweep {sweep:>4}  vocabulary {}", st.vocabulary_size()));
        }
        Ok(())
    })?;
    let header = [("frame_shift_ms", shift.to_string()), ("seed", a.seed.to_string())];
    write_atomic(&a.out, format_segmentations(&segs, &header).as_bytes())?;
    RunManifest::new(
        "segment",
        argv,
        json!({
            "sweeps": a.sweeps, "max_word_len": a.max_word_len, "d": a.d, "theta": a.theta,
            "pstop": a.pstop, "anneal": a.anneal,
        }),
    )
    .seed(a.seed)
    .input(&a.align)
    .output(&a.out)
    .write()?;
    log.say(format!(
        "segmented {} utterances into {} words ({} types)",
        segs.len(),
        segs.iter().map(|s| s.n_words()).sum::<usize>(),
        state.vocabulary_size()
    ));
    Ok(())
}

fn eval_words(a: &EvalWordsArgs, argv: &[String]) -> CmdResult {
    require_file("seg", &a.seg)?;
    require_file("align", &a.align)?;
    require_file("ref-words", &a.ref_words)?;
    require_out_dir("report", &a.report)?;
    check_tolerance(a.tol_ms)?;
    let segs = parse_segmentations(&read_text(&a.seg)?)?;
    let (file, shift) = read_alignments(&a.align)?;
    let refs = load_labels(&a.ref_words)?;
    let report = evaluate_words(&segs, &file.alignments, &refs, shift, a.tol_ms)?;
    write_atomic(&a.report, report.to_tsv(a.per_utt).as_bytes())?;
    RunManifest::new("eval-words", argv, json!({ "tol_ms": a.tol_ms, "per_utt": a.per_utt }))
        .input(&a.seg)
        .input(&a.align)
        .input(&a.ref_words)
        .output(&a.report)
        .write()?;
    let b = &report.boundary;
    println!(
        "utterances: {}\nword boundary P/R/F: {:.2} / {:.2} / {:.2} % (tol {} ms)",
        report.n_utterances,
        100.0 * b.precision,
        100.0 * b.recall,
        100.0 * b.f_score,
        a.tol_ms
    );
    Ok(())
}
