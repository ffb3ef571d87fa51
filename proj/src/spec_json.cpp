#include "pixie/config.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "pixie/grid_io.hpp"

namespace pixie::config {

namespace {

[[noreturn]] void schema(const std::string& where, const std::string& why) {
  throw Error(ErrorCode::SchemaError, where + ": " + why);
}

void require_object(const Json& j, const std::string& where) {
  if (!j.is_object()) schema(where, "expected an object");
}

void only_keys(const Json& j, const std::string& where, std::initializer_list<std::string_view> allowed) {
  require_object(j, where);
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || a == key;
    if (!ok) schema(where, "unknown key '" + key + "'");
  }
}

double number(const Json& j, const std::string& where) {
  if (!j.is_number()) schema(where, "expected a number");
  return j.get<double>();
}

int integer(const Json& j, const std::string& where) {
  if (!j.is_number_integer()) schema(where, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) schema(where, "out of range");
  return static_cast<int>(v);
}

std::uint64_t unsigned_integer(const Json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0)) {
    schema(where, "expected a non-negative integer");
  }
  return j.get<std::uint64_t>();
}

bool boolean(const Json& j, const std::string& where) {
  if (!j.is_boolean()) schema(where, "expected true or false");
  return j.get<bool>();
}

std::string string(const Json& j, const std::string& where) {
  if (!j.is_string()) schema(where, "expected a string");
  return j.get<std::string>();
}

Vec3 vec3(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) schema(where, "expected [x, y, z]");
  return {number(j[0], where), number(j[1], where), number(j[2], where)};
}

Json vec3_json(const Vec3& v) { return Json::array({v[0], v[1], v[2]}); }

std::vector<float> float_vector(const Json& j, const std::string& where) {
  if (!j.is_array() || j.empty()) schema(where, "expected a non-empty array of numbers");
  std::vector<float> out;
  out.reserve(j.size());
  for (const auto& x : j) out.push_back(static_cast<float>(number(x, where)));
  return out;
}

ValueRange range(const Json& j, const std::string& where) {
  if (j.is_number()) {
    const double v = j.get<double>();
    return {v, v};
  }
  if (j.is_array() && j.size() == 2) return {number(j[0], where), number(j[1], where)};
  schema(where, "expected a number or [lo, hi]");
}

Json range_json(const ValueRange& r) {
  if (r.min == r.max) return r.min;
  return Json::array({r.min, r.max});
}

MaterialClass material_class(const Json& j, const std::string& where) {
  const std::string name = string(j, where);
  const auto cls = parse_material_class(name);
  if (!cls || *cls == MaterialClass::Background) schema(where, "unknown material class '" + name + "'");
  return *cls;
}

const char* boundary_name(mpm::Boundary b) {
  switch (b) {
    case mpm::Boundary::Sticky: return "sticky";
    case mpm::Boundary::Slip: return "slip";
    case mpm::Boundary::Open: return "open";
  }
  return "sticky";
}

mpm::Boundary boundary(const Json& j, const std::string& where) {
  const std::string s = string(j, where);
  if (s == "sticky") return mpm::Boundary::Sticky;
  if (s == "slip") return mpm::Boundary::Slip;
  if (s == "open") return mpm::Boundary::Open;
  schema(where, "boundary must be sticky, slip or open");
}

mpm::PlasticityTable plasticity_from_json(const Json& j, mpm::PlasticityTable t) {
  const std::string w = "sim.plasticity";
  only_keys(j, w,
            {"metal_yield_stress", "plasticine_yield_stress", "sand_friction_angle_deg", "snow_theta_c",
             "snow_theta_s", "snow_hardening", "snow_min_jp", "snow_max_jp"});
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) field = number(j[key], w + "." + key);
  };
  get("metal_yield_stress", t.metal_yield_stress);
  get("plasticine_yield_stress", t.plasticine_yield_stress);
  get("sand_friction_angle_deg", t.sand_friction_angle_deg);
  get("snow_theta_c", t.snow_theta_c);
  get("snow_theta_s", t.snow_theta_s);
  get("snow_hardening", t.snow_hardening);
  get("snow_min_jp", t.snow_min_jp);
  get("snow_max_jp", t.snow_max_jp);
  return t;
}

Json to_json(const mpm::PlasticityTable& t) {
  return {{"metal_yield_stress", t.metal_yield_stress},
          {"plasticine_yield_stress", t.plasticine_yield_stress},
          {"sand_friction_angle_deg", t.sand_friction_angle_deg},
          {"snow_theta_c", t.snow_theta_c},
          {"snow_theta_s", t.snow_theta_s},
          {"snow_hardening", t.snow_hardening},
          {"snow_min_jp", t.snow_min_jp},
          {"snow_max_jp", t.snow_max_jp}};
}

TrainSection train_from_json(const Json& j, TrainSection s) {
  const std::string w = "train";
  only_keys(j, w, {"lambda", "learning_rate", "epochs", "batch_voxels", "lr_growth", "optimizer", "width"});
  if (j.contains("lambda")) s.cfg.lambda = number(j["lambda"], w + ".lambda");
  if (j.contains("learning_rate")) s.cfg.learning_rate = number(j["learning_rate"], w + ".learning_rate");
  if (j.contains("epochs")) s.cfg.epochs = integer(j["epochs"], w + ".epochs");
  if (j.contains("batch_voxels")) s.cfg.batch_voxels = integer(j["batch_voxels"], w + ".batch_voxels");
  if (j.contains("lr_growth")) s.cfg.lr_growth = number(j["lr_growth"], w + ".lr_growth");
  if (j.contains("optimizer")) {
    const Json& o = j["optimizer"];
    if (o == "gd") {
      s.cfg.optimizer = Optimizer::GradientDescent;
    } else if (o == "adam") {
      s.cfg.optimizer = Optimizer::Adam;
    } else {
      schema(w + ".optimizer", "expected \"gd\" or \"adam\"");
    }
  }
  if (j.contains("width")) s.width = integer(j["width"], w + ".width");
  return s;
}

Json to_json(const TrainSection& s) {
  return {{"lambda", s.cfg.lambda},
          {"learning_rate", s.cfg.learning_rate},
          {"epochs", s.cfg.epochs},
          {"batch_voxels", s.cfg.batch_voxels},
          {"lr_growth", s.cfg.lr_growth},
          {"optimizer", s.cfg.optimizer == Optimizer::Adam ? "adam" : "gd"},
          {"width", s.width}};
}

SimSection sim_from_json(const Json& j, SimSection s) {
  const std::string w = "sim";
  only_keys(j, w,
            {"grid_res", "dx", "origin", "dt", "gravity", "wind", "wind_ramp_frames", "frames", "substeps",
             "boundary", "boundary_cells", "damping", "cfl", "plasticity", "record_velocity",
             "particles_per_voxel", "search_radius"});
  auto& c = s.cfg;
  if (j.contains("grid_res")) c.grid_res = integer(j["grid_res"], w + ".grid_res");
  if (j.contains("dx")) c.dx = number(j["dx"], w + ".dx");
  if (j.contains("origin")) c.origin = vec3(j["origin"], w + ".origin");
  if (j.contains("dt")) c.dt = number(j["dt"], w + ".dt");
  if (j.contains("gravity")) c.gravity = vec3(j["gravity"], w + ".gravity");
  if (j.contains("wind")) c.wind = vec3(j["wind"], w + ".wind");
  if (j.contains("wind_ramp_frames")) c.wind_ramp_frames = integer(j["wind_ramp_frames"], w + ".wind_ramp_frames");
  if (j.contains("frames")) c.frames = integer(j["frames"], w + ".frames");
  if (j.contains("substeps")) c.substeps = integer(j["substeps"], w + ".substeps");
  if (j.contains("boundary")) {
    const Json& b = j["boundary"];
    if (b.is_string()) {
      c.boundary.fill(boundary(b, w + ".boundary"));
    } else if (b.is_array() && b.size() == 6) {
      for (int i = 0; i < 6; ++i) c.boundary[i] = boundary(b[i], w + ".boundary");
    } else {
      schema(w + ".boundary", "expected a string or six strings (x-, x+, y-, y+, z-, z+)");
    }
  }
  if (j.contains("boundary_cells")) c.boundary_cells = integer(j["boundary_cells"], w + ".boundary_cells");
  if (j.contains("damping")) c.damping = number(j["damping"], w + ".damping");
  if (j.contains("cfl")) c.cfl = number(j["cfl"], w + ".cfl");
  if (j.contains("plasticity")) c.plasticity = plasticity_from_json(j["plasticity"], c.plasticity);
  if (j.contains("record_velocity")) c.record_velocity = boolean(j["record_velocity"], w + ".record_velocity");
  if (j.contains("particles_per_voxel")) {
    s.particles_per_voxel = integer(j["particles_per_voxel"], w + ".particles_per_voxel");
  }
  if (j.contains("search_radius")) s.search_radius = integer(j["search_radius"], w + ".search_radius");
  return s;
}

Json to_json(const SimSection& s) {
  const auto& c = s.cfg;
  Json faces = Json::array();
  for (auto b : c.boundary) faces.push_back(boundary_name(b));
  return {{"grid_res", c.grid_res},
          {"dx", c.dx},
          {"origin", vec3_json(c.origin)},
          {"dt", c.dt},
          {"gravity", vec3_json(c.gravity)},
          {"wind", vec3_json(c.wind)},
          {"wind_ramp_frames", c.wind_ramp_frames},
          {"frames", c.frames},
          {"substeps", c.substeps},
          {"boundary", faces},
          {"boundary_cells", c.boundary_cells},
          {"damping", c.damping},
          {"cfl", c.cfl},
          {"plasticity", to_json(c.plasticity)},
          {"record_velocity", c.record_velocity},
          {"particles_per_voxel", s.particles_per_voxel},
          {"search_radius", s.search_radius}};
}

Json params_json(MaterialClass cls, const ContinuousParams& p) {
  return {{"material", std::string(material_class_name(cls))},
          {"E", p.young_modulus},
          {"nu", p.poisson_ratio},
          {"density", p.density}};
}

}  // namespace

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorCode::SchemaError, std::string("invalid JSON: ") + e.what());
  }
}

Json load_json_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return parse_json(std::string(bytes.begin(), bytes.end()));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

MaterialSpec material_spec_from_json(const Json& j) {
  only_keys(j, "material spec", {"parts", "constraints"});
  if (!j.contains("parts")) schema("material spec", "missing 'parts'");
  require_object(j["parts"], "material spec.parts");
  MaterialSpec spec;
  for (const auto& [name, part] : j["parts"].items()) {
    const std::string w = "material spec.parts." + name;
    only_keys(part, w, {"material", "E", "nu", "density"});
    for (const char* key : {"material", "E", "nu", "density"}) {
      if (!part.contains(key)) schema(w, std::string("missing '") + key + "'");
    }
    PartRanges r;
    r.cls = material_class(part["material"], w + ".material");
    r.e = range(part["E"], w + ".E");
    r.nu = range(part["nu"], w + ".nu");
    r.rho = range(part["density"], w + ".density");
    spec.parts[name] = r;
  }
  if (j.contains("constraints")) {
    if (!j["constraints"].is_array()) schema("material spec.constraints", "expected an array of strings");
    for (const auto& c : j["constraints"]) spec.add_constraint(string(c, "material spec.constraints"));
  }
  spec.validate();
  return spec;
}

Json to_json(const MaterialSpec& spec) {
  Json parts = Json::object();
  for (const auto& [name, r] : spec.parts) {
    parts[name] = {{"material", std::string(material_class_name(r.cls))},
                   {"E", range_json(r.e)},
                   {"nu", range_json(r.nu)},
                   {"density", range_json(r.rho)}};
  }
  Json constraints = Json::array();
  for (const auto& c : spec.constraints) constraints.push_back(c.source);
  return {{"parts", parts}, {"constraints", constraints}};
}

SampledMaterials sampled_from_json(const Json& j) {
  only_keys(j, "sampled materials", {"parts"});
  if (!j.contains("parts")) schema("sampled materials", "missing 'parts'");
  require_object(j["parts"], "sampled materials.parts");
  SampledMaterials out;
  for (const auto& [name, part] : j["parts"].items()) {
    const std::string w = "sampled materials.parts." + name;
    only_keys(part, w, {"material", "E", "nu", "density"});
    for (const char* key : {"material", "E", "nu", "density"}) {
      if (!part.contains(key)) schema(w, std::string("missing '") + key + "'");
    }
    PartSample s;
    s.cls = material_class(part["material"], w + ".material");
    s.params = {number(part["E"], w + ".E"), number(part["nu"], w + ".nu"), number(part["density"], w + ".density")};
    if (!s.params.valid()) schema(w, "parameters out of range");
    out[name] = s;
  }
  return out;
}

Json to_json(const SampledMaterials& sampled) {
  Json parts = Json::object();
  for (const auto& [name, s] : sampled) parts[name] = params_json(s.cls, s.params);
  return {{"parts", parts}};
}

QuerySet query_set_from_json(const Json& j) {
  only_keys(j, "query set", {"parts"});
  if (!j.contains("parts") || !j["parts"].is_array()) schema("query set", "'parts' must be an array");
  std::vector<PartQuery> parts;
  for (const auto& p : j["parts"]) {
    only_keys(p, "query set.parts[]", {"name", "embedding"});
    if (!p.contains("name") || !p.contains("embedding")) schema("query set.parts[]", "needs name and embedding");
    parts.push_back({string(p["name"], "query set.parts[].name"),
                     float_vector(p["embedding"], "query set.parts[].embedding")});
  }
  return QuerySet(std::move(parts));
}

Json to_json(const QuerySet& queries) {
  Json parts = Json::array();
  for (const auto& q : queries.parts()) parts.push_back({{"name", q.name}, {"embedding", q.embedding}});
  return {{"parts", parts}};
}

SynthSceneSpec synth_spec_from_json(const Json& j) {
  const std::string w = "synth spec";
  only_keys(j, w, {"noise", "seed", "parts", "primitives", "materials"});
  for (const char* key : {"parts", "primitives", "materials"}) {
    if (!j.contains(key)) schema(w, std::string("missing '") + key + "'");
  }
  SynthSceneSpec spec;
  if (j.contains("noise")) spec.noise = number(j["noise"], w + ".noise");
  if (j.contains("seed")) spec.seed = unsigned_integer(j["seed"], w + ".seed");
  if (!j["parts"].is_array()) schema(w + ".parts", "expected an array");
  for (const auto& p : j["parts"]) {
    only_keys(p, w + ".parts[]", {"name", "mean"});
    if (!p.contains("name") || !p.contains("mean")) schema(w + ".parts[]", "needs name and mean");
    spec.parts.push_back({string(p["name"], w + ".parts[].name"), float_vector(p["mean"], w + ".parts[].mean")});
  }
  if (!j["primitives"].is_array()) schema(w + ".primitives", "expected an array");
  for (const auto& p : j["primitives"]) {
    const std::string pw = w + ".primitives[]";
    require_object(p, pw);
    Primitive q;
    q.part = string(p.value("part", Json()), pw + ".part");
    const std::string type = string(p.value("type", Json()), pw + ".type");
    if (type == "box") {
      only_keys(p, pw, {"part", "type", "min", "max"});
      q.kind = PrimitiveKind::Box;
      q.lo = vec3(p.value("min", Json()), pw + ".min");
      q.hi = vec3(p.value("max", Json()), pw + ".max");
    } else if (type == "sphere") {
      only_keys(p, pw, {"part", "type", "center", "radius"});
      q.kind = PrimitiveKind::Sphere;
      q.center = vec3(p.value("center", Json()), pw + ".center");
      q.radius = number(p.value("radius", Json()), pw + ".radius");
    } else {
      schema(pw + ".type", "expected box or sphere");
    }
    spec.primitives.push_back(q);
  }
  spec.materials = material_spec_from_json(j["materials"]);
  spec.validate();
  return spec;
}

Json to_json(const SynthSceneSpec& spec) {
  Json parts = Json::array();
  for (const auto& p : spec.parts) parts.push_back({{"name", p.name}, {"mean", p.mean}});
  Json prims = Json::array();
  for (const auto& q : spec.primitives) {
    if (q.kind == PrimitiveKind::Box) {
      prims.push_back({{"part", q.part}, {"type", "box"}, {"min", vec3_json(q.lo)}, {"max", vec3_json(q.hi)}});
    } else {
      prims.push_back(
          {{"part", q.part}, {"type", "sphere"}, {"center", vec3_json(q.center)}, {"radius", q.radius}});
    }
  }
  return {{"noise", spec.noise},
          {"seed", spec.seed},
          {"parts", parts},
          {"primitives", prims},
          {"materials", to_json(spec.materials)}};
}

SceneBounds bounds_from_json(const Json& j) {
  only_keys(j, "bounds", {"min", "max"});
  if (!j.contains("min") || !j.contains("max")) schema("bounds", "needs min and max");
  return SceneBounds(vec3(j["min"], "bounds.min"), vec3(j["max"], "bounds.max"));
}

Json to_json(const SceneBounds& b) { return {{"min", vec3_json(b.min_corner)}, {"max", vec3_json(b.max_corner)}}; }

NormStats norm_stats_from_json(const Json& j, NormStats s) {
  const std::string w = "norm_stats";
  only_keys(j, w, {"log_e_min", "log_e_max", "nu_min", "nu_max", "log_rho_min", "log_rho_max"});
  auto get = [&](const char* key, double& field) {
    if (j.contains(key)) field = number(j[key], w + "." + key);
  };
  get("log_e_min", s.log_e_min);
  get("log_e_max", s.log_e_max);
  get("nu_min", s.nu_min);
  get("nu_max", s.nu_max);
  get("log_rho_min", s.log_rho_min);
  get("log_rho_max", s.log_rho_max);
  s.validate();
  return s;
}

Json to_json(const NormStats& s) {
  return {{"log_e_min", s.log_e_min}, {"log_e_max", s.log_e_max},     {"nu_min", s.nu_min},
          {"nu_max", s.nu_max},       {"log_rho_min", s.log_rho_min}, {"log_rho_max", s.log_rho_max}};
}

void RunConfig::validate() const {
  if (n < 1) schema("config", "n must be >= 1");
  if (d < 1) schema("config", "d must be >= 1");
  if (!(alpha >= 0.0)) schema("config", "alpha must be >= 0");
  norm_stats.validate();
  train.cfg.validate();
  if (train.width < 1) schema("train", "width must be >= 1");
  sim.cfg.validate();
  if (sim.particles_per_voxel < 1) schema("sim", "particles_per_voxel must be >= 1");
  if (sim.search_radius < 0) schema("sim", "search_radius must be >= 0");
}

RunConfig run_config_from_json(const Json& j, RunConfig c) {
  only_keys(j, "config",
            {"bounds", "dims", "alpha", "norm_stats", "material_spec", "query_set", "train", "sim", "eval", "seed",
             "deterministic"});
  if (j.contains("bounds")) c.bounds = bounds_from_json(j["bounds"]);
  if (j.contains("dims")) {
    only_keys(j["dims"], "dims", {"n", "d"});
    if (j["dims"].contains("n")) c.n = integer(j["dims"]["n"], "dims.n");
    if (j["dims"].contains("d")) c.d = integer(j["dims"]["d"], "dims.d");
  }
  if (j.contains("alpha")) c.alpha = number(j["alpha"], "alpha");
  if (j.contains("norm_stats")) c.norm_stats = norm_stats_from_json(j["norm_stats"], c.norm_stats);
  if (j.contains("material_spec")) c.material_spec = string(j["material_spec"], "material_spec");
  if (j.contains("query_set")) c.query_set = string(j["query_set"], "query_set");
  if (j.contains("train")) c.train = train_from_json(j["train"], c.train);
  if (j.contains("sim")) c.sim = sim_from_json(j["sim"], c.sim);
  if (j.contains("eval")) {
    only_keys(j["eval"], "eval", {"csv"});
    if (j["eval"].contains("csv")) c.eval.csv = boolean(j["eval"]["csv"], "eval.csv");
  }
  if (j.contains("seed")) c.seed = unsigned_integer(j["seed"], "seed");
  if (j.contains("deterministic")) c.deterministic = boolean(j["deterministic"], "deterministic");
  c.train.cfg.seed = c.seed;
  c.train.cfg.norm_stats = c.norm_stats;
  c.validate();
  return c;
}

Json to_json(const RunConfig& c) {
  return {{"bounds", to_json(c.bounds)},
          {"dims", {{"n", c.n}, {"d", c.d}}},
          {"alpha", c.alpha},
          {"norm_stats", to_json(c.norm_stats)},
          {"material_spec", c.material_spec},
          {"query_set", c.query_set},
          {"train", to_json(c.train)},
          {"sim", to_json(c.sim)},
          {"eval", {{"csv", c.eval.csv}}},
          {"seed", c.seed},
          {"deterministic", c.deterministic}};
}

}  // namespace pixie::config
