#include "comet/model_io.hpp"

#include "comet/npy.hpp"

#include <json.hpp>

#include <fstream>

namespace comet {

using nlohmann::json;

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ModelFormatError, path.string() + ": " + e.what());
  }
}

Eigen::MatrixXd read_square(const std::filesystem::path& path, Index dim) {
  const RowMatrix m = read_tensor(path).data;
  if (m.rows() != dim || m.cols() != dim) {
    throw Error(ErrorCode::ModelFormatError,
                path.string() + " is not " + std::to_string(dim) + "x" + std::to_string(dim));
  }
  return m;
}

Vector read_sized(const std::filesystem::path& path, Index dim) {
  Vector v = read_vector(path);
  if (v.size() != dim) {
    throw Error(ErrorCode::ModelFormatError,
                path.string() + " has length " + std::to_string(v.size()) + ", expected " +
                    std::to_string(dim));
  }
  return v;
}

}  // namespace

void save_model(const std::filesystem::path& dir, const DissectionModel& model,
                const std::string& source_manifest) {
  std::filesystem::create_directories(dir);
  write_vector(dir / "t_mean.npy", model.text_mean);
  write_vector(dir / "a_mean.npy", model.audio_mean);
  write_tensor(dir / "U.npy", RowMatrix(model.text_dirs));
  write_tensor(dir / "V.npy", RowMatrix(model.audio_dirs));
  write_vector(dir / "sigma.npy", model.sigma);
  json meta = {{"dim", model.dim()},
               {"n_train", model.n_train},
               {"source_manifest", source_manifest},
               {"tool_version", kToolVersion}};
  atomic_write(dir / "model.json", meta.dump(2) + "\n");
}

DissectionModel load_model(const std::filesystem::path& dir) {
  const json meta = read_json(dir / "model.json");
  DissectionModel model;
  Index dim = 0;
  try {
    dim = meta.at("dim").get<Index>();
    model.n_train = meta.at("n_train").get<Index>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ModelFormatError, (dir / "model.json").string() + ": " + e.what());
  }
  model.text_mean = read_sized(dir / "t_mean.npy", dim);
  model.audio_mean = read_sized(dir / "a_mean.npy", dim);
  model.text_dirs = read_square(dir / "U.npy", dim);
  model.audio_dirs = read_square(dir / "V.npy", dim);
  model.sigma = read_sized(dir / "sigma.npy", dim);
  return model;
}

void save_pca(const std::filesystem::path& dir, const PcaModel& pca,
              const std::string& source_manifest) {
  std::filesystem::create_directories(dir);
  write_vector(dir / "mean.npy", pca.mean);
  write_tensor(dir / "directions.npy", RowMatrix(pca.directions));
  write_vector(dir / "variances.npy", pca.variances);
  json meta = {{"dim", pca.dim()},
               {"modality", std::string(to_string(pca.modality))},
               {"source_manifest", source_manifest},
               {"tool_version", kToolVersion}};
  atomic_write(dir / "pca.json", meta.dump(2) + "\n");
}

PcaModel load_pca(const std::filesystem::path& dir) {
  const json meta = read_json(dir / "pca.json");
  PcaModel pca;
  Index dim = 0;
  try {
    dim = meta.at("dim").get<Index>();
    pca.modality = meta.at("modality").get<std::string>() == "audio" ? Modality::Audio
                                                                      : Modality::Text;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ModelFormatError, (dir / "pca.json").string() + ": " + e.what());
  }
  pca.mean = read_sized(dir / "mean.npy", dim);
  pca.directions = read_square(dir / "directions.npy", dim);
  pca.variances = read_sized(dir / "variances.npy", dim);
  return pca;
}

}  // namespace comet
