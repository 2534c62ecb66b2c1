#include <httplib.h>
#include <pthread.h>
#include <signal.h>

#include <chrono>
#include <cstdio>
#include <ostream>
#include <thread>

#include "common.hpp"
#include "mmtlab/annotate/service.hpp"
#include "mmtlab/annotate/store.hpp"
#include "mmtlab/corpus.hpp"
#include "mmtlab/error.hpp"
#include "mmtlab/metrics.hpp"
#include "mmtlab/noiser.hpp"
#include "mmtlab/text.hpp"
#include "mmtlab/tuning.hpp"

namespace mmtlab::cli {
namespace {

std::vector<std::string> load_pool(const std::string& path) {
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext != ".tsv" && ext != ".jsonl" && ext != ".json") return corpus::load_sentences(path);
  const auto split = corpus::load_corpus(path, corpus::format_from_path(path));
  std::vector<std::string> out;
  for (const auto& r : split.records) out.push_back(r.source);
  return out;
}

std::string fixed(double v, int digits = 2) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- serve --------------------------------------------------------------

struct ServeOptions {
  std::string store, media, addr = "127.0.0.1:8080";
};

int run_serve(Context& ctx, const ServeOptions& o) {
  const auto [host, port] = annotate::parse_address(o.addr);
  annotate::Store store(o.store);
  annotate::Service service(store, {o.media});
  const int bound = service.bind(host, port);

  write_manifest(ctx, std::filesystem::path(o.store) / "serve", "serve",
                 {{"addr", o.addr}, {"bound_port", bound}, {"media", o.media}}, 0, {o.store}, {store.log_path().string()});

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  sigaddset(&set, SIGUSR1);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  const pthread_t waiter = pthread_self();
  std::thread server([&] {
    service.run();
    pthread_kill(waiter, SIGUSR1);
  });
  service.wait_until_ready();
  ctx.out << "listening on http://" << host << ":" << bound << std::endl;
  int sig = 0;
  sigwait(&set, &sig);
  service.stop();
  server.join();
  pthread_sigmask(SIG_UNBLOCK, &set, nullptr);
  return 0;
}

// ---- tune-noise ---------------------------------------------------------

struct TuneOptions {
  std::string corpus, addr = "127.0.0.1:8080", out;
  std::size_t sample = 20;
  double target = 4.5, decrement = 0.1;
  noise::PerTypeDecrement per_type;
  std::uint64_t seed = 0;
  unsigned poll_ms = 1000;
  unsigned timeout_s = 0;
  std::size_t max_rounds = 10;
};

std::uint64_t fingerprint(const std::vector<std::pair<std::string, std::string>>& sample) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& [a, b] : sample)
    for (const std::string* s : {&a, &b}) {
      for (unsigned char c : *s) h = (h ^ c) * 0x100000001b3ULL;
      h = (h ^ 0xff) * 0x100000001b3ULL;
    }
  return h;
}

json config_json(const noise::NoiseConfig& c) {
  return {{"p_article", c.p_article},
          {"p_vowel", c.p_vowel},
          {"p_dupe", c.p_dupe},
          {"vowel_secondary_pass", c.vowel_secondary_pass},
          {"seed", c.seed}};
}

json expect_json(const httplib::Result& res, const std::string& what) {
  if (!res) throw Error(Errc::io, what + ": " + httplib::to_string(res.error()));
  json body = json::parse(res->body, nullptr, false);
  if (res->status >= 300) {
    const std::string msg = body.is_object() && body.contains("error") ? body["error"].value("message", res->body)
                                                                         : res->body;
    throw Error(Errc::data, what + " answered " + std::to_string(res->status) + ": " + msg);
  }
  if (body.is_discarded()) throw Error(Errc::data, what + " answered non-JSON");
  return body;
}

int run_tune(Context& ctx, const TuneOptions& o) {
  const auto [host, port] = annotate::parse_address(o.addr);
  const auto pool = load_pool(o.corpus);
  noise::TuningState state;
  state.config.seed = o.seed;
  state.sample_size = o.sample;
  state.target_mean = o.target;
  state.decrement = o.decrement;
  state.per_type = o.per_type;
  state = noise::start_tuning(state, pool);

  httplib::Client client(host, port);
  client.set_connection_timeout(5);
  const auto started = std::chrono::steady_clock::now();

  while (!state.converged) {
    if (state.round >= o.max_rounds)
      throw Error(Errc::state, "no convergence after " + std::to_string(o.max_rounds) + " rounds");
    char key[96];
    std::snprintf(key, sizeof key, "tune-s%llu-r%zu-%016llx", static_cast<unsigned long long>(o.seed), state.round,
                  static_cast<unsigned long long>(fingerprint(state.sample)));
    json items = json::array();
    for (const auto& [orig, noised] : state.sample) items.push_back({{"original", orig}, {"corrupted", noised}});
    const json created = expect_json(
        client.Post("/batches", json{{"kind", "naturalness"}, {"batch_key", key}, {"items", items}}.dump(),
                    "application/json"),
        "POST /batches");
    const std::string batch = created.at("batch").get<std::string>();
    ctx.out << "round " << state.round << ": batch " << batch << " p_article " << fixed(state.config.p_article, 1)
            << " p_vowel " << fixed(state.config.p_vowel, 1) << " p_dupe " << fixed(state.config.p_dupe, 1)
            << ", waiting for ratings" << std::endl;

    double mean = 0.0;
    for (;;) {
      auto res = client.Get("/reports/naturalness?batch=" + httplib::detail::encode_query_param(batch));
      if (res && res->status == 409) {
        if (o.timeout_s &&
            std::chrono::steady_clock::now() - started > std::chrono::seconds(o.timeout_s))
          throw Error(Errc::state, "timed out waiting for ratings of batch " + batch);
        std::this_thread::sleep_for(std::chrono::milliseconds(o.poll_ms));
        continue;
      }
      mean = expect_json(res, "GET /reports/naturalness").at("mean").get<double>();
      break;
    }
    ctx.out << "round " << state.round << ": mean rating " << fixed(mean) << std::endl;
    state = noise::tune_with_mean(state, mean, pool);
  }

  const json result = config_json(state.config);
  ctx.out << result.dump() << '\n';
  if (!o.out.empty()) {
    write_text(o.out, result.dump(2) + "\n");
    write_manifest(ctx, o.out, "tune-noise",
                   {{"sample", o.sample}, {"target", o.target}, {"decrement", o.decrement}, {"rounds", state.round},
                    {"addr", o.addr}},
                   o.seed, {o.corpus}, {o.out});
  }
  return 0;
}

// ---- create-batch -------------------------------------------------------

struct BatchOptions {
  std::string corpus, subset = "test", language, batch_key, addr = "127.0.0.1:8080";
  std::size_t first = 0;
};

int run_create_batch(Context& ctx, const BatchOptions& o) {
  const auto [host, port] = annotate::parse_address(o.addr);
  const auto split = corpus::load_corpus(o.corpus, corpus::format_from_path(o.corpus));
  const std::size_t n = o.first ? std::min(o.first, split.records.size()) : split.records.size();
  if (n == 0) throw Error(Errc::data, o.corpus + " has no records");
  json items = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = split.records[i];
    items.push_back({{"source", r.source},
                     {"target", r.target},
                     {"image", r.image_id},
                     {"subset", o.subset},
                     {"language", o.language.empty() ? r.lang : o.language}});
  }
  json request = {{"kind", "quality"}, {"items", items}};
  if (!o.batch_key.empty()) request["batch_key"] = o.batch_key;

  httplib::Client client(host, port);
  client.set_connection_timeout(5);
  const json created = expect_json(client.Post("/batches", request.dump(), "application/json"), "POST /batches");
  ctx.out << "batch\t" << created.at("batch").get<std::string>() << '\t' << created.at("tasks").size() << '\t'
          << (created.value("created", true) ? "created" : "existing") << '\n';
  return 0;
}

// ---- report -------------------------------------------------------------

struct QualityOptions {
  std::string store, subset, language, out;
};
struct NaturalnessOptions {
  std::string store, batch, out;
};
struct NoiseStatsOptions {
  std::string orig, noised, trace, out;
};

void emit(Context& ctx, const std::string& body, const std::string& out, const std::string& sub, const json& cfg,
          const std::vector<std::string>& inputs) {
  ctx.out << body;
  if (out.empty()) return;
  write_text(out, body);
  write_manifest(ctx, out, sub, cfg, 0, inputs, {out});
}

int run_quality(Context& ctx, const QualityOptions& o) {
  if (!std::filesystem::exists(std::filesystem::path(o.store) / "events.jsonl"))
    throw Error(Errc::not_found, "no store at " + o.store);
  const annotate::Store store(o.store);
  annotate::QualityFilter f;
  if (!o.subset.empty()) f.subset = o.subset;
  if (!o.language.empty()) f.language = o.language;
  const auto r = store.aggregate_quality(f);
  std::string body = "attribute\tgood\tmedium\tbad\n";
  body += "adequacy\t" + fixed(r.adequacy[0]) + "\t" + fixed(r.adequacy[1]) + "\t" + fixed(r.adequacy[2]) + "\n";
  body += "fluency\t" + fixed(r.fluency[0]) + "\t" + fixed(r.fluency[1]) + "\t" + fixed(r.fluency[2]) + "\n";
  body += "image_need\tyes\tmaybe\tno\tnot_reflected\n";
  body += "percent\t" + fixed(r.image_need[0]) + "\t" + fixed(r.image_need[1]) + "\t" + fixed(r.image_need[2]) + "\t" +
          fixed(r.image_need[3]) + "\n";
  body += "verdicts\t" + std::to_string(r.verdicts) + "\timage_need_verdicts\t" +
          std::to_string(r.image_need_verdicts) + "\n";
  emit(ctx, body, o.out, "report quality", {{"subset", o.subset}, {"language", o.language}}, {o.store});
  return 0;
}

int run_naturalness(Context& ctx, const NaturalnessOptions& o) {
  if (!std::filesystem::exists(std::filesystem::path(o.store) / "events.jsonl"))
    throw Error(Errc::not_found, "no store at " + o.store);
  const annotate::Store store(o.store);
  const auto r = store.aggregate_naturalness(o.batch);
  const std::string body = "batch\ttasks\tratings\tmean\n" + r.batch + "\t" + std::to_string(r.tasks) + "\t" +
                           std::to_string(r.ratings) + "\t" + fixed(r.mean, 4) + "\n";
  emit(ctx, body, o.out, "report naturalness", {{"batch", o.batch}}, {o.store});
  return 0;
}

int run_noise_stats(Context& ctx, const NoiseStatsOptions& o) {
  const auto orig = load_pool(o.orig);
  const auto noised = load_pool(o.noised);
  if (orig.size() != noised.size())
    throw Error(Errc::data, "original has " + std::to_string(orig.size()) + " sentences, noised has " +
                                std::to_string(noised.size()));
  if (orig.empty()) throw Error(Errc::data, "no sentences");
  const auto report = metrics::evaluate(noised, orig);
  std::size_t words_orig = 0, words_noised = 0;
  for (const auto& s : orig) words_orig += text::split_whitespace(s).size();
  for (const auto& s : noised) words_noised += text::split_whitespace(s).size();
  const double n = double(orig.size());

  std::string body = "sentences\t" + std::to_string(orig.size()) + "\n";
  body += "bleu\t" + fixed(report.bleu) + "\n";
  body += "chrf2\t" + fixed(report.chrf2) + "\n";
  body += "ter\t" + fixed(report.ter) + "\n";
  body += "avg_words_original\t" + fixed(double(words_orig) / n) + "\n";
  body += "avg_words_noised\t" + fixed(double(words_noised) / n) + "\n";
  std::vector<std::string> inputs = {o.orig, o.noised};
  if (!o.trace.empty()) {
    std::size_t counts[3] = {0, 0, 0};
    const std::string traces = read_text(o.trace);
    std::size_t pos = 0;
    while (pos < traces.size()) {
      std::size_t nl = traces.find('\n', pos);
      if (nl == std::string::npos) nl = traces.size();
      const std::string_view line(traces.data() + pos, nl - pos);
      if (!text::trim(line).empty())
        for (const auto& e : noise::trace_from_json(line).edits) ++counts[static_cast<int>(e.kind)];
      pos = nl + 1;
    }
    body += "article_drops\t" + std::to_string(counts[0]) + "\n";
    body += "vowel_drops\t" + std::to_string(counts[1]) + "\n";
    body += "duplicate_drops\t" + std::to_string(counts[2]) + "\n";
    inputs.push_back(o.trace);
  }
  emit(ctx, body, o.out, "report noise-stats", json::object(), inputs);
  return 0;
}

}  // namespace

Command add_serve(CLI::App& app) {
  auto o = std::make_shared<ServeOptions>();
  CLI::App* sub = app.add_subcommand("serve", "Run the annotation HTTP service until SIGINT/SIGTERM");
  sub->add_option("--store", o->store, "Store directory (created if missing)")->required();
  sub->add_option("--media", o->media, "Directory served under /media")->check(CLI::ExistingDirectory);
  sub->add_option("--addr", o->addr, "HOST:PORT (port 0 picks a free port)");
  return {sub, [o](Context& ctx) { return run_serve(ctx, *o); }};
}

Command add_tune_noise(CLI::App& app) {
  auto o = std::make_shared<TuneOptions>();
  CLI::App* sub = app.add_subcommand("tune-noise", "Drive naturalness rating rounds until the mean reaches the target");
  sub->add_option("--corpus", o->corpus, "Sentence pool (text lines or .tsv/.jsonl source column)")->required();
  sub->add_option("--sample", o->sample, "Sentences per round")->check(CLI::PositiveNumber);
  sub->add_option("--target", o->target, "Mean rating that ends tuning")->check(CLI::Range(1.0, 5.0));
  sub->add_option("--decrement", o->decrement, "Probability step per round")->check(CLI::Range(1e-9, 1.0));
  sub->add_option("--decrement-article", o->per_type.article, "Step for the article probability only")
      ->check(CLI::Range(1e-9, 1.0));
  sub->add_option("--decrement-vowel", o->per_type.vowel, "Step for the vowel probability only")
      ->check(CLI::Range(1e-9, 1.0));
  sub->add_option("--decrement-dupe", o->per_type.dupe, "Step for the duplicate-letter probability only")
      ->check(CLI::Range(1e-9, 1.0));
  sub->add_option("--addr", o->addr, "Annotation service HOST:PORT");
  sub->add_option("--seed", o->seed, "Random seed");
  sub->add_option("--poll-ms", o->poll_ms, "Report polling interval")->check(CLI::Range(1u, 600000u));
  sub->add_option("--timeout", o->timeout_s, "Give up after this many seconds (0 = never)");
  sub->add_option("--max-rounds", o->max_rounds, "Give up after this many rounds")->check(CLI::PositiveNumber);
  sub->add_option("--out", o->out, "Write the converged configuration as JSON");
  return {sub, [o](Context& ctx) { return run_tune(ctx, *o); }};
}

Command add_create_batch(CLI::App& app) {
  auto o = std::make_shared<BatchOptions>();
  CLI::App* sub = app.add_subcommand("create-batch", "Post quality-annotation tasks for corpus records to the service");
  sub->add_option("--corpus", o->corpus, "Corpus (.tsv or .jsonl) with source, target and image ids")->required();
  sub->add_option("--first", o->first, "Only the first N records (0 = all)");
  sub->add_option("--subset", o->subset, "Subset label stored with each task");
  sub->add_option("--language", o->language, "Language label (default: each record's)");
  sub->add_option("--batch-key", o->batch_key, "Idempotency key; resubmitting returns the same tasks");
  sub->add_option("--addr", o->addr, "Annotation service HOST:PORT");
  return {sub, [o](Context& ctx) { return run_create_batch(ctx, *o); }};
}

std::vector<Command> add_report(CLI::App& app) {
  CLI::App* report = app.add_subcommand("report", "Aggregation and noise statistics reports");
  report->require_subcommand(1);

  auto q = std::make_shared<QualityOptions>();
  CLI::App* quality = report->add_subcommand("quality", "Adequacy, fluency and image-need percentages");
  quality->add_option("--store", q->store, "Store directory")->required();
  quality->add_option("--subset", q->subset, "Only this subset");
  quality->add_option("--language", q->language, "Only this language (adequacy/fluency)");
  quality->add_option("--out", q->out, "Also write the report here");

  auto n = std::make_shared<NaturalnessOptions>();
  CLI::App* natural = report->add_subcommand("naturalness", "Mean naturalness rating of a batch");
  natural->add_option("--store", n->store, "Store directory")->required();
  natural->add_option("--batch", n->batch, "Batch id")->required();
  natural->add_option("--out", n->out, "Also write the report here");

  auto s = std::make_shared<NoiseStatsOptions>();
  CLI::App* stats = report->add_subcommand("noise-stats", "BLEU/chrF2/TER of noised text against the original");
  stats->add_option("--orig", s->orig, "Original sentences")->required();
  stats->add_option("--noised", s->noised, "Noised sentences")->required();
  stats->add_option("--trace", s->trace, "Trace JSONL from `noise --trace`");
  stats->add_option("--out", s->out, "Also write the report here");

  return {{quality, [q](Context& ctx) { return run_quality(ctx, *q); }},
          {natural, [n](Context& ctx) { return run_naturalness(ctx, *n); }},
          {stats, [s](Context& ctx) { return run_noise_stats(ctx, *s); }}};
}

}  // namespace mmtlab::cli
