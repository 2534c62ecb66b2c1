#include "codec.hpp"

#include "mmtlab/error.hpp"

namespace mmtlab::annotate::codec {
namespace {

[[noreturn]] void bad(const std::string& m) { throw Error(Errc::invalid_argument, m); }

const json& field(const json& j, const char* name) {
  if (!j.is_object()) bad("expected a JSON object");
  const auto it = j.find(name);
  if (it == j.end()) bad(std::string("missing field '") + name + "'");
  return *it;
}

std::string str(const json& j, const char* name) {
  const json& v = field(j, name);
  if (!v.is_string()) bad(std::string("field '") + name + "' must be a string");
  return v.get<std::string>();
}

std::string opt_str(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) return {};
  if (!it->is_string()) bad(std::string("field '") + name + "' must be a string");
  return it->get<std::string>();
}

bool present(const json& j, const char* name) {
  const auto it = j.find(name);
  return it != j.end() && !it->is_null();
}

}  // namespace

json to_json(const NaturalnessItem& item) { return {{"original", item.original}, {"corrupted", item.corrupted}}; }

json to_json(const QualityItem& item) {
  return {{"source", item.source},
          {"target", item.target},
          {"image", item.image},
          {"subset", item.subset},
          {"language", item.language}};
}

json to_json(const AnnotationTask& task) {
  json j = {{"task_id", task.task_id},
            {"batch", task.batch},
            {"kind", to_string(task.kind)},
            {"status", to_string(task.status)}};
  j["payload"] = task.kind == TaskKind::naturalness ? to_json(task.naturalness) : to_json(task.quality);
  return j;
}

json to_json(const Verdict& v) {
  json j = {{"task_id", v.task_id}, {"annotator_id", v.annotator_id}, {"timestamp", v.timestamp}};
  if (v.rating) j["rating"] = *v.rating;
  if (v.adequacy) j["adequacy"] = to_string(*v.adequacy);
  if (v.fluency) j["fluency"] = to_string(*v.fluency);
  if (v.image_need) j["image_need"] = to_string(*v.image_need);
  return j;
}

json to_json(const QualityReport& r) {
  auto grades = [](const std::array<double, 3>& a) {
    return json{{"good", a[0]}, {"medium", a[1]}, {"bad", a[2]}};
  };
  return {{"verdicts", r.verdicts},
          {"image_need_verdicts", r.image_need_verdicts},
          {"adequacy", grades(r.adequacy)},
          {"fluency", grades(r.fluency)},
          {"image_need",
           {{"yes", r.image_need[0]},
            {"maybe", r.image_need[1]},
            {"no", r.image_need[2]},
            {"not_reflected", r.image_need[3]}}}};
}

json to_json(const NaturalnessReport& r) {
  return {{"batch", r.batch}, {"tasks", r.tasks}, {"ratings", r.ratings}, {"mean", r.mean}};
}

NaturalnessItem naturalness_item(const json& j) { return {str(j, "original"), str(j, "corrupted")}; }

QualityItem quality_item(const json& j) {
  return {str(j, "source"), str(j, "target"), opt_str(j, "image"), opt_str(j, "subset"), opt_str(j, "language")};
}

AnnotationTask task(const json& j) {
  AnnotationTask t;
  t.task_id = str(j, "task_id");
  t.batch = str(j, "batch");
  t.kind = parse_task_kind(str(j, "kind"));
  if (t.kind == TaskKind::naturalness) t.naturalness = naturalness_item(field(j, "payload"));
  else t.quality = quality_item(field(j, "payload"));
  return t;
}

Verdict verdict(const json& j) {
  Verdict v;
  v.task_id = str(j, "task_id");
  v.annotator_id = str(j, "annotator_id");
  if (present(j, "rating")) {
    const json& r = j["rating"];
    if (!r.is_number_integer()) bad("field 'rating' must be an integer");
    const auto value = r.get<long long>();
    if (value < 1 || value > 5) bad("rating " + std::to_string(value) + " outside 1..5");
    v.rating = static_cast<int>(value);
  }
  if (present(j, "adequacy")) v.adequacy = parse_grade(str(j, "adequacy"));
  if (present(j, "fluency")) v.fluency = parse_grade(str(j, "fluency"));
  if (present(j, "image_need")) v.image_need = parse_image_need(str(j, "image_need"));
  if (present(j, "timestamp")) {
    const json& t = j["timestamp"];
    if (!t.is_number_integer()) bad("field 'timestamp' must be an integer");
    v.timestamp = t.get<std::int64_t>();
  }
  return v;
}

BatchRequest batch_request(const json& j) {
  BatchRequest req;
  req.kind = parse_task_kind(str(j, "kind"));
  if (present(j, "batch_key")) req.batch_key = str(j, "batch_key");
  const json& items = field(j, "items");
  if (!items.is_array()) bad("field 'items' must be an array");
  for (const json& item : items) {
    if (req.kind == TaskKind::naturalness) req.naturalness.push_back(naturalness_item(item));
    else req.quality.push_back(quality_item(item));
  }
  return req;
}

}  // namespace mmtlab::annotate::codec
