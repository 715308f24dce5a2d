// Apache License, Version 2.0, refer to LICENSE.txt

// Command-line front end: data preparation, fitting, evaluation, reports.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "tcrm/run.hpp"

namespace {

void add_fit_options(CLI::App* cmd, tcrm::RunConfig& cfg, bool with_model) {
  if (with_model) {
    cmd->add_option("--model", cfg.model, "lfm or topics")
        ->required()
        ->transform(CLI::CheckedTransformer(
            std::map<std::string, tcrm::ModelKind>{{"lfm", tcrm::ModelKind::lfm}, {"topics", tcrm::ModelKind::topics}}));
  }
  cmd->add_option("--data", cfg.data, "input data (LFM TSV or corpus TSV)")->required();
  cmd->add_option("--vocab", cfg.vocab, "vocabulary file, one token per line");
  cmd->add_option("--out", cfg.out, "run directory");
  cmd->add_option("--k", cfg.truncation, "truncation level (default 20 for lfm, 100 for topics)");
  cmd->add_option("--iters", cfg.iterations, "Gibbs sweeps")->capture_default_str();
  cmd->add_option("--burnin", cfg.burnin, "sweeps discarded before retaining samples")->capture_default_str();
  cmd->add_option("--thin", cfg.thin, "retain every n-th sweep after burn-in")->capture_default_str();
  cmd->add_option("--seed", cfg.seed)->capture_default_str();
  cmd->add_option("--chains", cfg.chains)->capture_default_str();
  cmd->add_option("--alpha-theta", cfg.alpha_theta, "Dirichlet parameter of the topics")->capture_default_str();
  cmd->add_option("--e", cfg.e, "gamma shape of the document rates")->capture_default_str();
  cmd->add_option("--c0", cfg.c0, "RVM precision prior shape")->capture_default_str();
  cmd->add_option("--d0", cfg.d0, "RVM precision prior rate")->capture_default_str();
  cmd->add_option("--widths", cfg.widths, "kernel width dictionary, comma separated")->delimiter(',');
  cmd->add_option("--noise-shape", cfg.noise_shape)->capture_default_str();
  cmd->add_option("--noise-scale", cfg.noise_scale)->capture_default_str();
  cmd->add_option("--feature-shape", cfg.feature_shape)->capture_default_str();
  cmd->add_option("--feature-scale", cfg.feature_scale)->capture_default_str();
  cmd->add_option("--holdout", cfg.holdout_words, "fraction of words held out per document")->capture_default_str();
  cmd->add_option("--holdout-docs", cfg.holdout_docs, "fraction of documents held out per decade")
      ->capture_default_str();
  cmd->add_option("--decade-width", cfg.decade_width)->capture_default_str();
  cmd->add_flag("!--static", cfg.dynamic, "turn thinning off (every indicator fixed at 1)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Thinned completely random measures: latent features and topics over covariates"};
  app.require_subcommand(1);

  tcrm::IngestOptions ingest_opt;
  std::string raw_path, out;
  std::uint64_t seed = 1;
  auto* ingest = app.add_subcommand("ingest", "Dated raw text to a filtered corpus");
  ingest->add_option("--data", raw_path, "raw text with '@@ <timestamp> [id]' headers")->required();
  ingest->add_option("--out", out, "output directory");
  ingest->add_option("--min-count", ingest_opt.min_count)->capture_default_str();
  ingest->add_option("--tfidf-quantile", ingest_opt.tfidf_quantile, "upper fraction of terms kept, 0 keeps all")
      ->capture_default_str();
  ingest->add_option("--paragraphs", ingest_opt.paragraphs_per_document)->capture_default_str();

  tcrm::BagOfItemsOptions bag_opt;
  auto* synth_lfm = app.add_subcommand("synth-lfm", "Synthetic covariate-dependent bag-of-items data");
  synth_lfm->add_option("--seed", seed)->capture_default_str();
  synth_lfm->add_option("--out", out);
  synth_lfm->add_option("--points", bag_opt.points_per_covariate, "points per covariate")->capture_default_str();
  synth_lfm->add_option("--noise", bag_opt.noise_variance, "noise variance")->capture_default_str();

  std::size_t topics_k = 8, vocab_size = 200, timestamps = 20, docs = 30;
  auto* synth_corpus = app.add_subcommand("synth-corpus", "Synthetic time-varying corpus");
  synth_corpus->add_option("--seed", seed)->capture_default_str();
  synth_corpus->add_option("--out", out);
  synth_corpus->add_option("--k", topics_k, "true number of topics")->capture_default_str();
  synth_corpus->add_option("--vocab-size", vocab_size)->capture_default_str();
  synth_corpus->add_option("--timestamps", timestamps)->capture_default_str();
  synth_corpus->add_option("--docs", docs, "documents per timestamp")->capture_default_str();

  tcrm::RunConfig fit_cfg, lfm_cfg, topic_cfg;
  auto* fit = app.add_subcommand("fit", "Fit either model");
  add_fit_options(fit, fit_cfg, true);
  auto* fit_lfm = app.add_subcommand("fit-lfm", "Fit the thinned latent feature model");
  add_fit_options(fit_lfm, lfm_cfg, false);
  auto* fit_topics = app.add_subcommand("fit-topics", "Fit the thinned gamma-process topic model");
  add_fit_options(fit_topics, topic_cfg, false);

  std::string run_dir, eval_data;
  auto* perplexity = app.add_subcommand("perplexity", "Held-out perplexity of a topic run");
  perplexity->add_option("--run", run_dir)->required();
  perplexity->add_option("--data", eval_data, "held-out corpus TSV (default: the run's word split)");

  auto* decade = app.add_subcommand("predict-decade", "Place documents in decades under a topic run");
  decade->add_option("--run", run_dir)->required();
  decade->add_option("--data", eval_data, "documents to place (default: the run's document split)");

  std::size_t top = 10;
  auto* report = app.add_subcommand("report", "Topic/feature tables and activation curves as CSV");
  report->add_option("--run", run_dir)->required();
  report->add_option("--top", top, "words per topic")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (ingest->parsed()) {
      const auto dir = tcrm::resolve_output(out, "ingest");
      tcrm::run_ingest(raw_path, dir, ingest_opt);
      std::cout << dir.string() << '\n';
    } else if (synth_lfm->parsed()) {
      const auto dir = tcrm::resolve_output(out, "synth-lfm-seed" + std::to_string(seed));
      tcrm::run_synth_lfm(seed, dir, bag_opt);
      std::cout << dir.string() << '\n';
    } else if (synth_corpus->parsed()) {
      const auto dir = tcrm::resolve_output(out, "synth-corpus-seed" + std::to_string(seed));
      tcrm::run_synth_corpus(seed, dir, topics_k, vocab_size, timestamps, docs);
      std::cout << dir.string() << '\n';
    } else if (fit->parsed() || fit_lfm->parsed() || fit_topics->parsed()) {
      tcrm::RunConfig cfg = fit->parsed() ? fit_cfg : fit_lfm->parsed() ? lfm_cfg : topic_cfg;
      if (fit_lfm->parsed()) cfg.model = tcrm::ModelKind::lfm;
      if (fit_topics->parsed()) cfg.model = tcrm::ModelKind::topics;
      const auto lay = cfg.model == tcrm::ModelKind::lfm ? tcrm::fit_lfm(cfg) : tcrm::fit_topics(cfg);
      std::cout << lay.root.string() << '\n';
    } else if (perplexity->parsed()) {
      std::cout << tcrm::evaluate_perplexity(run_dir, eval_data).dump() << '\n';
    } else if (decade->parsed()) {
      std::cout << tcrm::evaluate_decades(run_dir, eval_data).dump() << '\n';
    } else if (report->parsed()) {
      tcrm::write_report(run_dir, top);
    }
  } catch (const tcrm::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
