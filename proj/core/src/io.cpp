#include "tomo/io.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace tomo::io {

namespace {

using nlohmann::json;

// Payloads are raw float32/float64; this code assumes a little-endian host.

void write_bytes_atomic(const std::filesystem::path& path, const char* data,
                        std::size_t size) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open for writing: " + tmp.string());
    out.write(data, static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path sidecar_path(const std::filesystem::path& payload) {
  std::filesystem::path p = payload;
  p.replace_extension(".json");
  return p;
}

json extent_to_json(const VolumeExtent& e) {
  return json{{"min", {e.min_corner.x, e.min_corner.y, e.min_corner.z}},
              {"max", {e.max_corner.x, e.max_corner.y, e.max_corner.z}}};
}

VolumeExtent extent_from_json(const json& dims, const json& ext) {
  VolumeExtent e;
  e.nx = dims.at(0).get<int>();
  e.ny = dims.at(1).get<int>();
  e.nz = dims.at(2).get<int>();
  const auto& lo = ext.at("min");
  const auto& hi = ext.at("max");
  e.min_corner = {lo.at(0).get<double>(), lo.at(1).get<double>(), lo.at(2).get<double>()};
  e.max_corner = {hi.at(0).get<double>(), hi.at(1).get<double>(), hi.at(2).get<double>()};
  e.validate();
  return e;
}

json geom_to_json(const ScannerGeometry& g) {
  return json{{"sad", g.sad},
              {"sdd", g.sdd},
              {"det_rows", g.det_rows},
              {"det_cols", g.det_cols},
              {"det_pixel_pitch", g.det_pixel_pitch},
              {"angles_deg", g.angles_deg}};
}

ScannerGeometry geom_from_json(const json& j) {
  ScannerGeometry g;
  g.sad = j.at("sad").get<double>();
  g.sdd = j.at("sdd").get<double>();
  g.det_rows = j.at("det_rows").get<int>();
  g.det_cols = j.at("det_cols").get<int>();
  g.det_pixel_pitch = j.at("det_pixel_pitch").get<double>();
  g.angles_deg = j.at("angles_deg").get<std::vector<double>>();
  g.validate();
  return g;
}

json grid_to_json(const HashGridConfig& c) {
  return json{{"levels", c.levels},
              {"table_size_log2", c.table_size_log2},
              {"n_min", c.n_min},
              {"growth", c.growth}};
}

HashGridConfig grid_from_json(const json& j) {
  HashGridConfig c;
  c.levels = j.at("levels").get<int>();
  c.table_size_log2 = j.at("table_size_log2").get<int>();
  c.n_min = j.at("n_min").get<int>();
  c.growth = j.at("growth").get<double>();
  c.validate();
  return c;
}

json domain_to_json(const VolumeExtent& e) {
  json j = extent_to_json(e);
  j["dims"] = {e.nx, e.ny, e.nz};
  return j;
}

VolumeExtent domain_from_json(const json& j) { return extent_from_json(j.at("dims"), j); }

constexpr char kCheckpointMagic[8] = {'T', 'O', 'M', 'O', 'C', 'K', 'P', '1'};

}  // namespace

void write_volume(const std::filesystem::path& payload_path, const Volume& vol,
                  const std::string& kind) {
  vol.extent.validate();
  if (vol.data.size() != vol.extent.n_voxels())
    throw std::invalid_argument("write_volume: data length mismatch");

  json sidecar{{"dims", {vol.extent.nx, vol.extent.ny, vol.extent.nz}},
               {"extent", extent_to_json(vol.extent)},
               {"kind", kind},
               {"dtype", "f32le"},
               {"version", 1}};
  write_bytes_atomic(payload_path, reinterpret_cast<const char*>(vol.data.data()),
                     vol.data.size() * sizeof(float));
  write_text_atomic(sidecar_path(payload_path), sidecar.dump(2) + "\n");
}

Volume read_volume(const std::filesystem::path& payload_path) {
  const json sidecar = json::parse(read_text(sidecar_path(payload_path)));
  if (sidecar.at("dtype").get<std::string>() != "f32le")
    throw std::runtime_error("read_volume: unsupported dtype");
  Volume vol;
  vol.extent = extent_from_json(sidecar.at("dims"), sidecar.at("extent"));
  const std::string bytes = read_bytes(payload_path);
  if (bytes.size() != vol.extent.n_voxels() * sizeof(float))
    throw std::runtime_error("read_volume: payload size mismatch");
  vol.data.resize(vol.extent.n_voxels());
  std::memcpy(vol.data.data(), bytes.data(), bytes.size());
  return vol;
}

void write_stack(const std::filesystem::path& payload_path, const ProjectionStack& stack) {
  stack.validate();
  json sidecar{{"dims", {stack.geom.n_views(), stack.geom.det_rows, stack.geom.det_cols}},
               {"geometry", geom_to_json(stack.geom)},
               {"kind", to_string(stack.kind)},
               {"dtype", "f32le"},
               {"version", 1}};
  write_bytes_atomic(payload_path, reinterpret_cast<const char*>(stack.data.data()),
                     stack.data.size() * sizeof(float));
  write_text_atomic(sidecar_path(payload_path), sidecar.dump(2) + "\n");
}

ProjectionStack read_stack(const std::filesystem::path& payload_path) {
  const json sidecar = json::parse(read_text(sidecar_path(payload_path)));
  if (sidecar.at("dtype").get<std::string>() != "f32le")
    throw std::runtime_error("read_stack: unsupported dtype");
  ProjectionStack stack(geom_from_json(sidecar.at("geometry")),
                        stack_kind_from_string(sidecar.at("kind").get<std::string>()));
  const std::string bytes = read_bytes(payload_path);
  if (bytes.size() != stack.data.size() * sizeof(float))
    throw std::runtime_error("read_stack: payload size mismatch");
  std::memcpy(stack.data.data(), bytes.data(), bytes.size());
  return stack;
}

void write_pgm16(const std::filesystem::path& path, std::span<const float> image, int rows,
                 int cols, const SliceMeta& meta) {
  if (image.size() != static_cast<std::size_t>(rows) * cols)
    throw std::invalid_argument("write_pgm16: image size mismatch");
  if (!(meta.window > 0.0)) throw std::invalid_argument("write_pgm16: window must be > 0");

  const double lo = meta.level - 0.5 * meta.window;
  std::string bytes;
  {
    std::ostringstream header;
    header << "P5\n" << cols << " " << rows << "\n65535\n";
    bytes = header.str();
  }
  bytes.reserve(bytes.size() + image.size() * 2);
  for (float v : image) {
    double t = (static_cast<double>(v) - lo) / meta.window;
    t = std::clamp(t, 0.0, 1.0);
    const auto q = static_cast<std::uint16_t>(std::lround(t * 65535.0));
    bytes.push_back(static_cast<char>(q >> 8));  // PGM samples are big-endian
    bytes.push_back(static_cast<char>(q & 0xff));
  }
  write_bytes_atomic(path, bytes.data(), bytes.size());

  json sidecar{{"axis", meta.axis}, {"index", meta.index},   {"window", meta.window},
               {"level", meta.level}, {"rows", rows},        {"cols", cols},
               {"maxval", 65535},     {"version", 1}};
  write_text_atomic(sidecar_path(path), sidecar.dump(2) + "\n");
}

namespace {

json segments_to_json(const ParamLayout& layout) {
  json arr = json::array();
  for (const ParamSegment& s : layout.segments)
    arr.push_back({{"name", s.name}, {"offset", s.offset}, {"size", s.size}});
  return arr;
}

void check_segments(const json& arr, const ParamLayout& layout) {
  if (arr.size() != layout.segments.size())
    throw std::runtime_error("checkpoint: segment map mismatch");
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const ParamSegment& s = layout.segments[i];
    if (arr[i].at("name").get<std::string>() != s.name ||
        arr[i].at("offset").get<std::int64_t>() != s.offset ||
        arr[i].at("size").get<std::int64_t>() != s.size)
      throw std::runtime_error("checkpoint: segment map mismatch");
  }
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const FieldVariant& field) {
  json header;
  const std::vector<double>* params = nullptr;
  if (const auto* quad = std::get_if<QuadField>(&field)) {
    header["kind"] = "quad";
    header["grid"] = grid_to_json(quad->grid_config);
    header["domain"] = domain_to_json(quad->domain);
    header["hidden_width"] = quad->shape_mlp.hidden;
    header["segments"] = segments_to_json(quad->layout);
    header["param_count"] = quad->layout.total;
    params = &quad->params;
  } else {
    const auto& single = std::get<SingleField>(field);
    header["kind"] = "single";
    header["grid"] = grid_to_json(single.grid_config);
    header["domain"] = domain_to_json(single.domain);
    header["hidden_width"] = single.mlp.hidden;
    header["segments"] = segments_to_json(single.layout);
    header["param_count"] = single.layout.total;
    params = &single.params;
  }
  header["version"] = 1;

  const std::string header_text = header.dump();
  std::string bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  const std::uint64_t header_len = header_text.size();
  bytes.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  bytes.append(header_text);
  bytes.append(reinterpret_cast<const char*>(params->data()),
               params->size() * sizeof(double));
  write_bytes_atomic(path, bytes.data(), bytes.size());
}

FieldVariant read_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_bytes(path);
  if (bytes.size() < sizeof(kCheckpointMagic) + sizeof(std::uint64_t) ||
      std::memcmp(bytes.data(), kCheckpointMagic, sizeof(kCheckpointMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic");

  std::uint64_t header_len = 0;
  std::memcpy(&header_len, bytes.data() + sizeof(kCheckpointMagic), sizeof(header_len));
  const std::size_t header_off = sizeof(kCheckpointMagic) + sizeof(std::uint64_t);
  if (bytes.size() < header_off + header_len)
    throw std::runtime_error("checkpoint: truncated header");
  const json header = json::parse(bytes.substr(header_off, header_len));

  const HashGridConfig grid = grid_from_json(header.at("grid"));
  const VolumeExtent domain = domain_from_json(header.at("domain"));
  const std::string kind = header.at("kind").get<std::string>();

  FieldVariant field = kind == "quad" ? FieldVariant(QuadField::create(grid, domain, 0))
                                      : FieldVariant(SingleField::create(grid, domain, 0));

  std::vector<double>* params = nullptr;
  if (auto* quad = std::get_if<QuadField>(&field)) {
    check_segments(header.at("segments"), quad->layout);
    params = &quad->params;
  } else {
    auto& single = std::get<SingleField>(field);
    if (header.at("hidden_width").get<int>() != single.mlp.hidden)
      throw std::runtime_error("checkpoint: hidden width mismatch");
    check_segments(header.at("segments"), single.layout);
    params = &single.params;
  }

  const std::size_t blob_off = header_off + header_len;
  if (bytes.size() - blob_off != params->size() * sizeof(double))
    throw std::runtime_error("checkpoint: parameter blob size mismatch");
  std::memcpy(params->data(), bytes.data() + blob_off, bytes.size() - blob_off);
  return field;
}

void write_train_log(const std::filesystem::path& path, const TrainLog& log,
                     bool include_timing) {
  std::ostringstream out;
  for (const TrainLogRecord& r : log.records) {
    json rec{{"iteration", r.iteration},
             {"loss", r.loss},
             {"loss_data", r.loss_data},
             {"loss_tissue", r.loss_tissue},
             {"lambda", r.lambda},
             {"ssim", r.ssim},
             {"seconds", include_timing ? r.seconds : 0.0}};
    if (std::isfinite(r.psnr_db))
      rec["psnr_db"] = r.psnr_db;
    else
      rec["psnr_db"] = nullptr;  // identical volumes
    out << rec.dump() << "\n";
  }
  write_text_atomic(path, out.str());
}

void write_text_atomic(const std::filesystem::path& path, const std::string& text) {
  write_bytes_atomic(path, text.data(), text.size());
}

std::string read_text(const std::filesystem::path& path) { return read_bytes(path); }

}  // namespace tomo::io
