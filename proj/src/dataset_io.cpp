#include "d4am/dataset_io.hpp"

#include <fstream>
#include <iterator>

#include "binary_io.hpp"
#include "d4am/errors.hpp"

namespace d4am {

namespace {

constexpr char kMatrixMagic[8] = {'D', '4', 'A', 'M', 'M', 'A', 'T', 'X'};
constexpr char kLabelMagic[8] = {'D', '4', 'A', 'M', 'L', 'A', 'B', 'L'};
constexpr std::uint32_t kVersion = 1;

void write_file(const std::vector<unsigned char>& buf, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void start(std::vector<unsigned char>& buf, const char (&magic)[8]) {
  buf.insert(buf.end(), std::begin(magic), std::end(magic));
  binio::put_u32(buf, kVersion);
  binio::put_u32(buf, 0);
}

void finish(std::vector<unsigned char>& buf) {
  binio::put_u32(buf, binio::crc32_of(buf.data(), buf.size()));
}

// Checks magic, version, exact size and CRC; `header` is the offset of the
// payload and `payload` its byte length derived from the header fields.
void check(const std::vector<unsigned char>& buf, const char (&magic)[8], std::size_t header,
           const std::filesystem::path& path) {
  if (buf.size() < header + 4) throw IoError("file truncated: " + path.string());
  if (!std::equal(std::begin(magic), std::end(magic), buf.begin())) {
    throw IoError("bad magic: " + path.string());
  }
  if (binio::get_u32(buf.data() + 8) != kVersion) {
    throw IoError("unsupported version: " + path.string());
  }
}

void check_crc(const std::vector<unsigned char>& buf, std::size_t body,
               const std::filesystem::path& path) {
  if (buf.size() != body + 4) throw IoError("size does not match header: " + path.string());
  if (binio::crc32_of(buf.data(), body) != binio::get_u32(buf.data() + body)) {
    throw IoError("checksum mismatch: " + path.string());
  }
}

}  // namespace

void save_matrix(const Matrix& m, const std::filesystem::path& path) {
  if (m.data.size() != m.rows * m.cols) throw ShapeError("save_matrix: inconsistent matrix");
  std::vector<unsigned char> buf;
  buf.reserve(36 + 8 * m.data.size());
  start(buf, kMatrixMagic);
  binio::put_u64(buf, m.rows);
  binio::put_u64(buf, m.cols);
  for (double v : m.data) binio::put_f64(buf, v);
  finish(buf);
  write_file(buf, path);
}

Matrix load_matrix(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  check(buf, kMatrixMagic, 32, path);
  const std::uint64_t rows = binio::get_u64(buf.data() + 16);
  const std::uint64_t cols = binio::get_u64(buf.data() + 24);
  const std::size_t room = (buf.size() - 36) / 8;
  if (cols != 0 && rows > room / cols) throw IoError("size does not match header: " + path.string());
  const std::size_t n = rows * cols;
  check_crc(buf, 32 + 8 * n, path);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < n; ++i) m.data[i] = binio::get_f64(buf.data() + 32 + 8 * i);
  return m;
}

void save_labels(std::span<const int> labels, const std::filesystem::path& path) {
  std::vector<unsigned char> buf;
  buf.reserve(28 + 4 * labels.size());
  start(buf, kLabelMagic);
  binio::put_u64(buf, labels.size());
  for (int v : labels) binio::put_u32(buf, static_cast<std::uint32_t>(v));
  finish(buf);
  write_file(buf, path);
}

std::vector<int> load_labels(const std::filesystem::path& path) {
  const auto buf = read_file(path);
  check(buf, kLabelMagic, 24, path);
  const std::uint64_t n = binio::get_u64(buf.data() + 16);
  if (n > (buf.size() - 28) / 4) throw IoError("size does not match header: " + path.string());
  check_crc(buf, 24 + 4 * n, path);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<int>(binio::get_u32(buf.data() + 24 + 4 * i));
  }
  return out;
}

nlohmann::json task_spec_to_json(const TaskSpec& s) {
  return {
      {"feature_dim", s.feature_dim},
      {"num_classes", s.num_classes},
      {"snr_low_db", s.snr_low_db},
      {"snr_high_db", s.snr_high_db},
      {"clean_generator", to_string(s.clean_generator)},
      {"noise_generator", to_string(s.noise_generator)},
      {"train_size", s.train_size},
      {"val_size", s.val_size},
      {"test_size", s.test_size},
      {"label_fraction", s.label_fraction},
      {"seed", s.seed},
      {"subspace_rank", s.subspace_rank},
      {"class_separation", s.class_separation},
      {"within_class_scale", s.within_class_scale},
      {"shared_subspace", s.shared_subspace},
  };
}

TaskSpec task_spec_from_json(const nlohmann::json& j) {
  TaskSpec s;
  try {
    s.feature_dim = j.at("feature_dim").get<std::size_t>();
    s.num_classes = j.at("num_classes").get<std::size_t>();
    s.snr_low_db = j.at("snr_low_db").get<double>();
    s.snr_high_db = j.at("snr_high_db").get<double>();
    s.clean_generator = parse_clean_generator(j.at("clean_generator").get<std::string>());
    s.noise_generator = parse_noise_generator(j.at("noise_generator").get<std::string>());
    s.train_size = j.at("train_size").get<std::size_t>();
    s.val_size = j.at("val_size").get<std::size_t>();
    s.test_size = j.at("test_size").get<std::size_t>();
    s.label_fraction = j.at("label_fraction").get<double>();
    s.seed = j.at("seed").get<std::uint64_t>();
    s.subspace_rank = j.at("subspace_rank").get<std::size_t>();
    s.class_separation = j.at("class_separation").get<double>();
    s.within_class_scale = j.at("within_class_scale").get<double>();
    s.shared_subspace = j.at("shared_subspace").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("task metadata: ") + e.what());
  }
  s.validate();
  return s;
}

void save_task_data(const TaskData& d, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());

  save_matrix(d.clean_train.features, dir / "train_clean.mat");
  save_labels(d.clean_train.labels, dir / "train_labels.lab");
  save_matrix(d.reg_train.noisy, dir / "reg_noisy.mat");
  save_matrix(d.cls_train.noisy, dir / "cls_noisy.mat");
  save_labels(d.cls_train.labels, dir / "cls_labels.lab");
  save_matrix(d.val.noisy, dir / "val_noisy.mat");
  save_matrix(d.val.clean, dir / "val_clean.mat");
  save_labels(d.val.labels, dir / "val_labels.lab");
  save_matrix(d.test.noisy, dir / "test_noisy.mat");
  save_matrix(d.test.clean, dir / "test_clean.mat");
  save_labels(d.test.labels, dir / "test_labels.lab");

  nlohmann::json meta = {
      {"format", "d4am-task"},
      {"version", 1},
      {"spec", task_spec_to_json(d.spec)},
      {"splits",
       {{"train", d.clean_train.features.rows},
        {"cls_train", d.cls_train.noisy.rows},
        {"val", d.val.noisy.rows},
        {"test", d.test.noisy.rows}}},
  };
  std::ofstream out(dir / "task.json", std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + (dir / "task.json").string());
  out << meta.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + (dir / "task.json").string());
}

TaskData load_task_data(const std::filesystem::path& dir) {
  std::ifstream in(dir / "task.json");
  if (!in) throw IoError("cannot open: " + (dir / "task.json").string());
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed " + (dir / "task.json").string() + ": " + e.what());
  }
  if (meta.value("format", "") != "d4am-task") {
    throw IoError("not a task sidecar: " + (dir / "task.json").string());
  }

  TaskData d;
  d.spec = task_spec_from_json(meta.at("spec"));
  d.clean_train.features = load_matrix(dir / "train_clean.mat");
  d.clean_train.labels = load_labels(dir / "train_labels.lab");
  d.reg_train.noisy = load_matrix(dir / "reg_noisy.mat");
  d.reg_train.clean = d.clean_train.features;
  d.cls_train.noisy = load_matrix(dir / "cls_noisy.mat");
  d.cls_train.labels = load_labels(dir / "cls_labels.lab");
  d.val.noisy = load_matrix(dir / "val_noisy.mat");
  d.val.clean = load_matrix(dir / "val_clean.mat");
  d.val.labels = load_labels(dir / "val_labels.lab");
  d.test.noisy = load_matrix(dir / "test_noisy.mat");
  d.test.clean = load_matrix(dir / "test_clean.mat");
  d.test.labels = load_labels(dir / "test_labels.lab");

  const auto& sp = meta.at("splits");
  auto expect = [&](const char* key, std::size_t got) {
    if (sp.at(key).get<std::size_t>() != got) {
      throw DataError(std::string("split '") + key + "' size disagrees with task.json");
    }
  };
  expect("train", d.clean_train.features.rows);
  expect("cls_train", d.cls_train.noisy.rows);
  expect("val", d.val.noisy.rows);
  expect("test", d.test.noisy.rows);
  d.reg_train.validate();
  d.cls_train.validate(d.spec.num_classes);
  return d;
}

}  // namespace d4am
