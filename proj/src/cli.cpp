#include "comet/cli.hpp"

#include "comet/dataset.hpp"
#include "comet/diagnostics.hpp"
#include "comet/mappers.hpp"
#include "comet/model_io.hpp"
#include "comet/npy.hpp"
#include "comet/parallel.hpp"
#include "comet/pca.hpp"
#include "comet/pls.hpp"
#include "comet/retrieval.hpp"
#include "comet/synthetic.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <string>
#include <vector>

namespace comet {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

// Shared knobs. `--paper-defaults` pins k, tau and variance and is mutually
// exclusive with setting any of them by hand.
struct Knobs {
  Index k = kDefaultHeadSize;
  double tau = kDefaultTau;
  double variance = kDefaultNoiseVariance;
  std::uint64_t seed = 0;
  bool paper_defaults = false;
  std::string precision = "f64";

  Precision prec() const { return precision == "f32" ? Precision::F32 : Precision::F64; }
};

struct Options {
  int threads = 0;

  std::string dataset;
  std::string model;
  std::string pca;
  std::string bank;
  std::string input;
  std::string input_modality = "audio";
  std::string out;
  std::string method;
  std::string repr = "raw";
  std::string direction = "both";
  std::string preset;
  double test_fraction = 0.0;
  double mass = 0.99;
  double dedup = 0.95;
  Index top_directions = 0;
  Index top_items = 5;
  Index exact_limit = NegativeSampling{}.exact_limit;
  std::int64_t sample_pairs = NegativeSampling{}.sample_pairs;
  bool write_uv = false;
  Knobs knobs;
};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  atomic_write(path, j.dump(2) + "\n");
}

json knobs_json(const Knobs& kb, bool with_k, bool with_tau, bool with_variance) {
  json j;
  if (with_k) j["k"] = kb.k;
  if (with_tau) j["tau"] = kb.tau;
  if (with_variance) j["variance"] = kb.variance;
  j["paper_defaults"] = kb.paper_defaults;
  return j;
}

json header(const std::string& command) {
  return json{{"command", command}, {"tool_version", kToolVersion}};
}

// A .json path is read as a manifest; anything else as a 2-D NPY tensor.
RowMatrix load_rows(const std::string& path, Modality modality) {
  if (fs::path(path).extension() == ".json") {
    const PairedDataset d = load_dataset(read_manifest(path));
    return modality == Modality::Text ? d.text.data : d.audio.data;
  }
  return read_tensor(path, modality).data;
}

Modality parse_modality(const std::string& s) {
  return s == "text" ? Modality::Text : Modality::Audio;
}

RowMatrix one_row_per_group(const RowMatrix& rows, const std::vector<int>& groups) {
  const auto starts = group_starts(groups);
  RowMatrix out(static_cast<Index>(starts.size()), rows.cols());
  for (std::size_t g = 0; g < starts.size(); ++g) out.row(static_cast<Index>(g)) = rows.row(starts[g]);
  return out;
}

void require_head(Index k, Index dim) {
  if (k < 1 || k >= dim) {
    throw Error(ErrorCode::BadK,
                "head size " + std::to_string(k) + " outside [1, " + std::to_string(dim) + ")");
  }
}

std::vector<Direction> directions(const std::string& s) {
  if (s == "t2a") return {Direction::TextToAudio};
  if (s == "a2t") return {Direction::AudioToText};
  return {Direction::TextToAudio, Direction::AudioToText};
}

json metrics_json(const RetrievalMetrics& m) {
  json r;
  for (const auto& [cut, v] : m.r_at) r["R" + std::to_string(cut)] = v;
  r["mean_rank"] = m.mean_rank;
  r["median_rank"] = m.median_rank;
  r["mAP10"] = m.map10;
  r["n_queries"] = m.n_queries;
  r["n_gallery"] = m.n_gallery;
  return r;
}

// Text and audio representations for one retrieval/compression recipe.
struct Representation {
  RowMatrix text;
  RowMatrix audio;
};

Representation represent(const Options& o, const PairedDataset& data) {
  const std::string& r = o.repr;
  const Index k = o.knobs.k;
  if (r == "raw") return {data.text.data, data.audio.data};
  if (r == "pcahead") {
    if (o.pca.empty()) throw CLI::RequiredError("--pca (needed by --repr pcahead)");
    const PcaModel pt = load_pca(fs::path(o.pca) / "text");
    const PcaModel pa = load_pca(fs::path(o.pca) / "audio");
    return {project_pca(pt, data.text, k).values, project_pca(pa, data.audio, k).values};
  }
  if (o.model.empty()) throw CLI::RequiredError("--model (needed by --repr " + r + ")");
  const DissectionModel model = load_model(o.model);
  const Coefficients t = project(model, data.text);
  const Coefficients a = project(model, data.audio);
  if (r == "plshead") return {truncate_head(t, k).values, truncate_head(a, k).values};
  if (r == "plsheadw") {
    return {truncate_head(t, k).values, reweight_head(model, truncate_head(a, k)).values};
  }
  if (r == "tail") return {tail(t, k).values, tail(a, k).values};
  // recon
  return {reconstruct(model, t, k).data, reconstruct(model, a, k).data};
}

int cmd_fit(const Options& o) {
  const PairedDataset data = load_dataset(read_manifest(o.dataset));
  save_model(o.out, fit(data), o.dataset);
  return 0;
}

int cmd_pca(const Options& o) {
  const PairedDataset data = load_dataset(read_manifest(o.dataset));
  save_pca(fs::path(o.out) / "text", fit_pca(data.text), o.dataset);
  save_pca(fs::path(o.out) / "audio", fit_pca(data.audio), o.dataset);
  return 0;
}

int cmd_diagnose(const Options& o) {
  const DissectionModel model = load_model(o.model);
  const PairedDataset data = load_dataset(read_manifest(o.dataset));
  const Index k = o.knobs.k;
  const Index c = model.dim();
  if (data.dim() != c) throw Error(ErrorCode::DimensionMismatch, "dataset and model dimensions differ");
  require_head(k, c);

  const Vector uv = uv_alignments(model);
  const Vector net = net_useful_contribution(model);
  const CovarianceDecomposition cov = covariance_decomposition(model, data);

  std::string csv = "index,sigma,uv,sqrt_cov,std_t,std_a,corr,net_useful,degenerate\n";
  double eq4 = 0.0;
  for (Index j = 0; j < c; ++j) {
    const bool deg = cov.degenerate[static_cast<std::size_t>(j)];
    csv += std::to_string(j) + "," + num(model.sigma(j)) + "," + num(uv(j)) + "," +
           num(cov.sqrt_cov(j)) + "," + num(cov.text_std(j)) + "," + num(cov.audio_std(j)) +
           "," + num(cov.corr(j)) + "," + num(net(j)) + "," + (deg ? "1" : "0") + "\n";
    if (!deg) {
      const double lhs = cov.corr(j) * cov.text_std(j) * cov.audio_std(j);
      eq4 = std::max(eq4, std::abs(lhs - cov.sqrt_cov(j) * cov.sqrt_cov(j)));
    }
  }
  const fs::path out(o.out);
  fs::create_directories(out);
  atomic_write(out / "diagnostics.csv", csv);

  NegativeSampling sampling;
  sampling.exact_limit = o.exact_limit;
  sampling.sample_pairs = o.sample_pairs;
  sampling.seed = o.knobs.seed;
  const ContributionReport rep = contribution_report(model, data, k, sampling);

  const Coefficients t = project(model, data.text);
  const Coefficients a = project(model, data.audio);
  json norms = json::array();
  for (const auto& s : subspace_norms(t, a, {{0, k}, {k, c}, {0, c}})) {
    norms.push_back({{"begin", s.range.begin},
                     {"end", s.range.end},
                     {"text", s.mean_norm_text},
                     {"audio", s.mean_norm_audio}});
  }

  json j = header("diagnose");
  j["model"] = o.model;
  j["dataset"] = o.dataset;
  j["parameters"] = knobs_json(o.knobs, true, false, false);
  j["parameters"]["seed"] = o.knobs.seed;
  j["rows"] = data.size();
  j["dim"] = c;
  j["covariance"] = {{"matches_model", cov.matches_model},
                     {"degenerate_indices",
                      std::count(cov.degenerate.begin(), cov.degenerate.end(), true)}};
  // The identity only holds on the data the model was fitted on.
  j["covariance"]["eq4_max_residual"] = cov.matches_model ? json(eq4) : json(nullptr);
  j["contributions"] = {
      {"positive", {{"direct", rep.direct_pos}, {"direct_head", rep.direct_k_pos}, {"cross", rep.cross_pos}}},
      {"negative", {{"direct", rep.direct_neg}, {"direct_head", rep.direct_k_neg}, {"cross", rep.cross_neg}}},
      {"k", rep.k},
      {"negative_pairs", rep.negative_pairs},
      {"negative_sampling", rep.negative_sampling}};
  j["subspace_norms"] = norms;

  if (o.top_directions > 0) {
    if (!data.texts) throw Error(ErrorCode::MissingTexts, "dataset manifest has no texts");
    json tops = json::array();
    for (Index d = 0; d < std::min(o.top_directions, c); ++d) {
      json items = json::array();
      for (const auto& it : top_items_by_direction(t, data.text.data, *data.texts, d, o.top_items, o.dedup)) {
        items.push_back({{"row", it.row}, {"text", it.text}, {"value", it.value}});
      }
      tops.push_back({{"direction", d}, {"items", items}});
    }
    write_json(out / "top_items.json", {{"dedup_threshold", o.dedup}, {"directions", tops}});
  }
  if (o.write_uv) write_tensor(out / "uv_matrix.npy", RowMatrix(uv_matrix(model, true)));
  write_json(out / "summary.json", j);
  return 0;
}

int cmd_compress(const Options& o) {
  const PairedDataset data = load_dataset(read_manifest(o.dataset));
  const Representation rep = represent(o, data);
  const fs::path out(o.out);
  fs::create_directories(out);
  write_tensor(out / "text.npy", rep.text, o.knobs.prec());
  write_tensor(out / "audio.npy", one_row_per_group(rep.audio, data.groups), o.knobs.prec());
  write_manifest(out / "manifest.json",
                 DatasetManifest{data.name + "-" + o.repr, out / "text.npy", out / "audio.npy",
                                 data.groups, data.texts});
  json j = header("compress");
  j["dataset"] = o.dataset;
  j["repr"] = o.repr;
  j["width"] = rep.text.cols();
  j["parameters"] = knobs_json(o.knobs, o.repr != "raw", false, false);
  j["precision"] = o.knobs.precision;
  write_json(out / "compress.json", j);
  return 0;
}

int cmd_map(const Options& o) {
  const std::string& m = o.method;
  const RowMatrix queries = load_rows(o.input, parse_modality(o.input_modality));
  json meta = header("map");
  meta["method"] = m;
  meta["in"] = o.input;
  RowMatrix mapped;

  auto need = [&](const std::string& value, const char* flag) {
    if (value.empty()) throw CLI::RequiredError(std::string(flag) + " (needed by --method " + m + ")");
  };
  if (m == "es") {
    need(o.model, "--model");
    const DissectionModel model = load_model(o.model);
    mapped = embedding_shift(model.text_mean, model.audio_mean, queries);
    meta["model"] = o.model;
  } else if (m == "ni") {
    mapped = noise_inject(queries, o.knobs.variance, o.knobs.seed);
    meta["parameters"] = knobs_json(o.knobs, false, false, true);
    meta["parameters"]["seed"] = o.knobs.seed;
  } else if (m == "nnd" || m == "pd") {
    need(o.bank, "--bank");
    const MemoryBank bank(load_rows(o.bank, Modality::Text), o.bank);
    meta["bank"] = o.bank;
    if (m == "nnd") {
      std::vector<Index> idx;
      mapped = map_nnd(bank, queries, &idx);
      meta["indices"] = idx;
    } else {
      mapped = map_pd(bank, queries, o.knobs.tau);
      meta["parameters"] = knobs_json(o.knobs, false, true, false);
    }
  } else {
    need(o.model, "--model");
    need(o.bank, "--bank");
    const DissectionModel model = load_model(o.model);
    const RowMatrix bank = load_rows(o.bank, Modality::Text);
    const LinearPdBatch lp =
        linear_pd_batch(model, centered(bank, model.text_mean), centered(queries, model.audio_mean));
    mapped = lp.factored;
    meta["model"] = o.model;
    meta["bank"] = o.bank;
    meta["centering"] = "bank - t_mean, queries - a_mean";
    meta["max_abs_direct_minus_factored"] = (lp.direct - lp.factored).cwiseAbs().maxCoeff();
  }
  meta["rows"] = mapped.rows();
  meta["precision"] = o.knobs.precision;
  write_tensor(o.out, mapped, o.knobs.prec());
  write_json(fs::path(o.out).replace_extension(".json"), meta);
  return 0;
}

int cmd_retrieve(const Options& o) {
  const PairedDataset data = load_dataset(read_manifest(o.dataset));
  const Representation rep = represent(o, data);
  json j = header("retrieve");
  j["dataset"] = o.dataset;
  j["repr"] = o.repr;
  j["parameters"] = knobs_json(o.knobs, o.repr != "raw", false, false);
  j["map10_denominator"] = "min(|positives|, 10)";
  j["tie_break"] = "lower gallery index";
  for (Direction d : directions(o.direction)) {
    j["metrics"][std::string(to_string(d))] = metrics_json(retrieve(rep.text, rep.audio, data.groups, d));
  }
  if (o.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(o.out, j);
  }
  return 0;
}

int cmd_pd_verify(const Options& o) {
  const DissectionModel model = load_model(o.model);
  const PairedDataset eval = load_dataset(read_manifest(o.dataset));
  const MemoryBank bank(load_rows(o.bank, Modality::Text), o.bank);
  const PdCharacterization pc = pd_characterize(model, eval, bank, o.knobs.tau, o.knobs.k);

  const RowMatrix queries = l2_normalize(one_row_per_group(eval.audio.data, eval.groups));
  std::vector<Index> support(static_cast<std::size_t>(queries.rows()));
  parallel_for(0, queries.rows(), [&](Index i) {
    support[static_cast<std::size_t>(i)] =
        softmax_support(bank, queries.row(i).transpose(), o.knobs.tau, o.mass);
  });
  std::vector<Index> sorted = support;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  const double median = sorted.size() % 2 == 1
                            ? static_cast<double>(sorted[mid])
                            : 0.5 * static_cast<double>(sorted[mid - 1] + sorted[mid]);
  double mean = 0.0;
  for (Index s : support) mean += static_cast<double>(s);
  mean /= static_cast<double>(support.size());

  json j = header("pd-verify");
  j["model"] = o.model;
  j["dataset"] = o.dataset;
  j["bank"] = o.bank;
  j["parameters"] = knobs_json(o.knobs, true, true, false);
  j["characterization"] = {{"cos_mean_before", pc.cos_mean_before},
                           {"cos_mean_after", pc.cos_mean_after},
                           {"dist_mean_before", pc.dist_mean_before},
                           {"dist_mean_after", pc.dist_mean_after},
                           {"head_cos_mean", pc.head_cos_mean},
                           {"tail_cos_mean", pc.tail_cos_mean},
                           {"head_cos_mean_nnd", pc.head_cos_mean_nnd},
                           {"audio_mean_cos_train_eval", pc.audio_mean_cos_train_eval},
                           {"audio_mean_dist_train_eval", pc.audio_mean_dist_train_eval},
                           {"degenerate", pc.degenerate},
                           {"n_queries", pc.n_queries}};
  j["softmax_support"] = {{"mass", o.mass},
                          {"mean", mean},
                          {"median", median},
                          {"min", sorted.front()},
                          {"max", sorted.back()},
                          {"bank_size", bank.size()}};
  if (o.out.empty()) {
    std::cout << j.dump(2) << "\n";
  } else {
    write_json(o.out, j);
  }
  return 0;
}

json spec_json(const SyntheticSpec& s) {
  return {{"n", s.n},
          {"c", s.c},
          {"k_shared", s.k_shared},
          {"shared_cov", s.shared_cov},
          {"tail_energy_text", s.tail_energy_text},
          {"tail_energy_audio", s.tail_energy_audio},
          {"mean_gap_norm", s.mean_gap_norm},
          {"uv_misalignment", s.uv_misalignment},
          {"seed", s.seed},
          {"text_mean_norm", s.text_mean_norm},
          {"captions_per_item", s.captions_per_item},
          {"private_rank", s.private_rank},
          {"private_std", s.private_std}};
}

void write_split(const fs::path& dir, const std::string& stem, const PairedDataset& d,
                 Precision prec) {
  const fs::path text = dir / (stem + "_text.npy");
  const fs::path audio = dir / (stem + "_audio.npy");
  write_tensor(text, d.text.data, prec);
  write_tensor(audio, one_row_per_group(d.audio.data, d.groups), prec);
  write_manifest(dir / (stem + ".json"), DatasetManifest{d.name + "-" + stem, text, audio, d.groups, d.texts});
}

int cmd_synth(const Options& o) {
  const SyntheticSpec spec = preset(o.preset, o.knobs.seed);
  SyntheticData syn = generate(spec);
  syn.dataset.name = o.preset;
  const fs::path out(o.out);
  fs::create_directories(out);
  const Precision prec = o.knobs.prec();

  write_tensor(out / "text.npy", syn.dataset.text.data, prec);
  write_tensor(out / "audio.npy", one_row_per_group(syn.dataset.audio.data, syn.dataset.groups), prec);
  write_manifest(out / "manifest.json", DatasetManifest{o.preset, out / "text.npy", out / "audio.npy",
                                                        syn.dataset.groups, std::nullopt});
  write_tensor(out / "truth_text_dirs.npy", RowMatrix(syn.truth.text_dirs));
  write_tensor(out / "truth_audio_dirs.npy", RowMatrix(syn.truth.audio_dirs));

  json j = header("synth");
  j["preset"] = o.preset;
  j["spec"] = spec_json(spec);
  j["expected_sigma"] = std::vector<double>(syn.truth.expected_sigma.data(),
                                            syn.truth.expected_sigma.data() + syn.truth.expected_sigma.size());
  j["text_mean"] = std::vector<double>(syn.truth.text_mean.data(),
                                       syn.truth.text_mean.data() + syn.truth.text_mean.size());
  j["audio_mean"] = std::vector<double>(syn.truth.audio_mean.data(),
                                        syn.truth.audio_mean.data() + syn.truth.audio_mean.size());
  j["precision"] = o.knobs.precision;

  if (o.test_fraction > 0.0) {
    if (!(o.test_fraction < 1.0)) throw Error(ErrorCode::BadSpec, "--test-fraction must lie in [0, 1)");
    const auto first = static_cast<Index>(
        std::llround((1.0 - o.test_fraction) * static_cast<double>(syn.dataset.size())));
    const auto [train, test] = split_dataset(syn.dataset, first);
    write_split(out, "train", train, prec);
    write_split(out, "test", test, prec);
    j["split"] = {{"train_rows", train.size()}, {"test_rows", test.size()}};
  }
  write_json(out / "truth.json", j);
  return 0;
}

void add_knob_k(CLI::App* sub, Options& o, std::vector<CLI::Option*>& pinned) {
  pinned.push_back(sub->add_option("--k", o.knobs.k, "Head size")->check(CLI::PositiveNumber));
}
void add_knob_tau(CLI::App* sub, Options& o, std::vector<CLI::Option*>& pinned) {
  pinned.push_back(sub->add_option("--tau", o.knobs.tau, "Softmax temperature"));
}
void add_knob_variance(CLI::App* sub, Options& o, std::vector<CLI::Option*>& pinned) {
  pinned.push_back(sub->add_option("--variance", o.knobs.variance, "Noise variance"));
}
void add_paper_defaults(CLI::App* sub, Options& o, const std::vector<CLI::Option*>& pinned) {
  auto* flag = sub->add_flag("--paper-defaults", o.knobs.paper_defaults,
                             "Pin k=100, tau=0.01, variance=0.013");
  for (auto* p : pinned) flag->excludes(p);
}
void add_precision(CLI::App* sub, Options& o) {
  sub->add_option("--precision", o.knobs.precision, "Tensor output dtype")
      ->check(CLI::IsMember({"f32", "f64"}));
}

std::string one_line(std::string s) {
  std::replace(s.begin(), s.end(), '\n', ' ');
  return s;
}

int configure_threads(int flag) {
  int n = flag;
  if (n <= 0) {
    if (const char* env = std::getenv("COMET_THREADS")) {
      try {
        n = std::stoi(env);
      } catch (const std::exception&) {
        throw CLI::ValidationError("COMET_THREADS", "must be a positive integer");
      }
      if (n <= 0) throw CLI::ValidationError("COMET_THREADS", "must be a positive integer");
    } else {
      n = 1;
    }
  }
  set_thread_count(n);
  return n;
}

}  // namespace

int run_cli(int argc, char** argv) {
  Options o;
  CLI::App app{"Cross-modal embedding dissection toolkit", "comet"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", kToolVersion);
  app.add_option("--threads", o.threads, "Worker threads (overrides COMET_THREADS)")
      ->check(CLI::PositiveNumber);

  auto* fit_cmd = app.add_subcommand("fit", "Fit the dissection model on paired data");
  fit_cmd->add_option("--dataset", o.dataset, "Dataset manifest")->required();
  fit_cmd->add_option("--out", o.out, "Model directory")->required();

  auto* pca_cmd = app.add_subcommand("pca", "Fit per-modality PCA baselines");
  pca_cmd->add_option("--dataset", o.dataset, "Dataset manifest")->required();
  pca_cmd->add_option("--out", o.out, "Output directory (text/ and audio/)")->required();

  auto* diag = app.add_subcommand("diagnose", "Per-direction diagnostics and summary");
  {
    std::vector<CLI::Option*> pinned;
    diag->add_option("--model", o.model, "Model directory")->required();
    diag->add_option("--dataset", o.dataset, "Dataset manifest")->required();
    diag->add_option("--out", o.out, "Report directory")->required();
    add_knob_k(diag, o, pinned);
    add_paper_defaults(diag, o, pinned);
    diag->add_option("--seed", o.knobs.seed, "Seed for sampled negative pairs");
    diag->add_option("--exact-limit", o.exact_limit, "Largest N scored over all negative pairs");
    diag->add_option("--sample-pairs", o.sample_pairs, "Sampled negative pairs above the limit")
        ->check(CLI::PositiveNumber);
    diag->add_option("--top-directions", o.top_directions, "List top items for directions 0..D-1");
    diag->add_option("--top-items", o.top_items, "Items per direction")->check(CLI::PositiveNumber);
    diag->add_option("--dedup", o.dedup, "Cosine above which a top item counts as a duplicate");
    diag->add_flag("--uv-matrix", o.write_uv, "Also write |U^T V| as uv_matrix.npy");
  }

  const std::vector<std::string> reprs = {"raw", "plshead", "plsheadw", "pcahead", "recon", "tail"};
  auto* comp = app.add_subcommand("compress", "Write compressed embeddings and a manifest");
  {
    std::vector<CLI::Option*> pinned;
    comp->add_option("--dataset", o.dataset, "Dataset manifest")->required();
    comp->add_option("--model", o.model, "Model directory");
    comp->add_option("--pca", o.pca, "PCA directory from `comet pca`");
    comp->add_option("--repr", o.repr, "Representation")->check(CLI::IsMember(reprs));
    comp->add_option("--out", o.out, "Output directory")->required();
    add_knob_k(comp, o, pinned);
    add_paper_defaults(comp, o, pinned);
    add_precision(comp, o);
  }

  auto* map_cmd = app.add_subcommand("map", "Map embeddings across the modality gap");
  {
    std::vector<CLI::Option*> pinned;
    map_cmd->add_option("--method", o.method, "Mapper")
        ->required()
        ->check(CLI::IsMember({"es", "ni", "nnd", "pd", "linear-pd"}));
    map_cmd->add_option("--in", o.input, "Queries: NPY tensor or manifest")->required();
    map_cmd->add_option("--in-modality", o.input_modality, "Rows taken from a manifest input")
        ->check(CLI::IsMember({"text", "audio"}));
    map_cmd->add_option("--model", o.model, "Model directory (es, linear-pd)");
    map_cmd->add_option("--bank", o.bank, "Memory bank: NPY tensor or manifest (text rows)");
    map_cmd->add_option("--out", o.out, "Output NPY; metadata goes next to it as .json")->required();
    map_cmd->add_option("--seed", o.knobs.seed, "Noise seed");
    add_knob_tau(map_cmd, o, pinned);
    add_knob_variance(map_cmd, o, pinned);
    add_paper_defaults(map_cmd, o, pinned);
    add_precision(map_cmd, o);
  }

  auto* ret = app.add_subcommand("retrieve", "Cross-modal retrieval metrics");
  {
    std::vector<CLI::Option*> pinned;
    ret->add_option("--dataset", o.dataset, "Dataset manifest")->required();
    ret->add_option("--model", o.model, "Model directory");
    ret->add_option("--pca", o.pca, "PCA directory from `comet pca`");
    ret->add_option("--repr", o.repr, "Representation")->check(CLI::IsMember(reprs));
    ret->add_option("--direction", o.direction, "t2a, a2t or both")
        ->check(CLI::IsMember({"t2a", "a2t", "both"}));
    ret->add_option("--out", o.out, "Metrics JSON (stdout when omitted)");
    add_knob_k(ret, o, pinned);
    add_paper_defaults(ret, o, pinned);
  }

  auto* pdv = app.add_subcommand("pd-verify", "Characterize projection decoding");
  {
    std::vector<CLI::Option*> pinned;
    pdv->add_option("--model", o.model, "Model directory")->required();
    pdv->add_option("--dataset", o.dataset, "Evaluation manifest")->required();
    pdv->add_option("--bank", o.bank, "Memory bank: NPY tensor or manifest (text rows)")->required();
    pdv->add_option("--mass", o.mass, "Softmax mass for the support measurement");
    pdv->add_option("--out", o.out, "Report JSON (stdout when omitted)");
    add_knob_k(pdv, o, pinned);
    add_knob_tau(pdv, o, pinned);
    add_paper_defaults(pdv, o, pinned);
  }

  auto* syn = app.add_subcommand("synth", "Generate a synthetic paired dataset");
  syn->add_option("--preset", o.preset, "Preset name")->required()->check(CLI::IsMember(preset_names()));
  syn->add_option("--seed", o.knobs.seed, "Generator seed");
  syn->add_option("--out", o.out, "Output directory")->required();
  syn->add_option("--test-fraction", o.test_fraction, "Also write train/test manifests");
  add_precision(syn, o);

  try {
    app.parse(argc, argv);
    configure_threads(o.threads);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*fit_cmd) return cmd_fit(o);
    if (*pca_cmd) return cmd_pca(o);
    if (*diag) return cmd_diagnose(o);
    if (*comp) return cmd_compress(o);
    if (*map_cmd) return cmd_map(o);
    if (*ret) return cmd_retrieve(o);
    if (*pdv) return cmd_pd_verify(o);
    if (*syn) return cmd_synth(o);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << one_line(e.what()) << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << to_string(e.code()) << ": " << one_line(e.what()) << "\n";
    return 1;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: IoError: " << one_line(e.what()) << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: Internal: " << one_line(e.what()) << "\n";
    return 1;
  }
  return 2;
}

}  // namespace comet
