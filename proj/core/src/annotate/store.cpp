#include "mmtlab/annotate/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "codec.hpp"
#include "mmtlab/error.hpp"

namespace mmtlab::annotate {

const char* to_string(TaskKind k) noexcept { return k == TaskKind::naturalness ? "naturalness" : "quality"; }
const char* to_string(TaskStatus s) noexcept { return s == TaskStatus::open ? "open" : "done"; }

const char* to_string(Grade g) noexcept {
  switch (g) {
    case Grade::good: return "good";
    case Grade::medium: return "medium";
    case Grade::bad: return "bad";
  }
  return "?";
}

const char* to_string(ImageNeed n) noexcept {
  switch (n) {
    case ImageNeed::yes: return "yes";
    case ImageNeed::maybe: return "maybe";
    case ImageNeed::no: return "no";
    case ImageNeed::not_reflected: return "not_reflected";
  }
  return "?";
}

TaskKind parse_task_kind(std::string_view s) {
  if (s == "naturalness") return TaskKind::naturalness;
  if (s == "quality") return TaskKind::quality;
  throw Error(Errc::invalid_argument, "unknown task kind '" + std::string(s) + "'");
}

Grade parse_grade(std::string_view s) {
  if (s == "good") return Grade::good;
  if (s == "medium") return Grade::medium;
  if (s == "bad") return Grade::bad;
  throw Error(Errc::invalid_argument, "grade must be good, medium or bad, got '" + std::string(s) + "'");
}

ImageNeed parse_image_need(std::string_view s) {
  if (s == "yes") return ImageNeed::yes;
  if (s == "maybe") return ImageNeed::maybe;
  if (s == "no") return ImageNeed::no;
  if (s == "not_reflected" || s == "not reflected") return ImageNeed::not_reflected;
  throw Error(Errc::invalid_argument,
              "image_need must be yes, maybe, no or not_reflected, got '" + std::string(s) + "'");
}

std::vector<double> percentages(const std::vector<std::size_t>& counts) {
  std::size_t total = 0;
  for (auto c : counts) total += c;
  std::vector<double> out(counts.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t i = 0; i < counts.size(); ++i) out[i] = 100.0 * double(counts[i]) / double(total);
  return out;
}

namespace {

using codec::json;

// "T000010" sorts after "T000009" and "T1000000" after "T999999".
struct IdLess {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const {
    return a.size() != b.size() ? a.size() < b.size() : a < b;
  }
};

std::string numbered(char prefix, std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%c%06zu", prefix, n);
  return buf;
}

}  // namespace

struct Store::Index {
  std::map<std::string, AnnotationTask, IdLess> tasks;
  std::map<std::string, std::vector<std::string>, std::less<>> batches;
  std::vector<std::string> batch_order;
  std::vector<Verdict> log;
  // (task, annotator) -> position in `log` of the newest verdict
  std::map<std::pair<std::string, std::string>, std::size_t> latest;
  std::size_t task_count = 0;
  std::size_t batch_count = 0;

  bool answered(const std::string& task_id, std::string_view annotator) const {
    return latest.contains({task_id, std::string(annotator)});
  }

  AnnotationTask view(const AnnotationTask& t) const {
    AnnotationTask out = t;
    const auto it = latest.lower_bound({t.task_id, std::string()});
    out.status = it != latest.end() && it->first.first == t.task_id ? TaskStatus::done : TaskStatus::open;
    return out;
  }
};

Store::Store(const std::filesystem::path& dir) : index_(std::make_unique<Index>()) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(Errc::io, "cannot create store directory " + dir.string() + ": " + ec.message());
  log_path_ = dir / "events.jsonl";

  std::string contents;
  {
    std::ifstream in(log_path_, std::ios::binary);
    if (in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      contents = ss.str();
    }
  }
  std::size_t pos = 0, line_no = 0;
  while (pos < contents.size()) {
    const std::size_t nl = contents.find('\n', pos);
    if (nl == std::string::npos) break;  // torn tail, discarded below
    ++line_no;
    const std::string line = contents.substr(pos, nl - pos);
    pos = nl + 1;
    if (line.empty()) continue;
    try {
      apply_line(line);
    } catch (const std::exception& e) {
      throw Error(Errc::data, log_path_.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }

  fd_ = ::open(log_path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw Error(Errc::io, "cannot open " + log_path_.string() + ": " + std::strerror(errno));
  if (pos < contents.size() && ::ftruncate(fd_, static_cast<off_t>(pos)) != 0) {
    const int err = errno;
    ::close(fd_);
    throw Error(Errc::io, "cannot drop torn tail of " + log_path_.string() + ": " + std::strerror(err));
  }
}

Store::~Store() {
  if (fd_ >= 0) ::close(fd_);
}

void Store::append(const std::string& line) {
  const std::string data = line + "\n";
  std::size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd_, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(Errc::io, "append to " + log_path_.string() + " failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  if (::fsync(fd_) != 0) throw Error(Errc::io, "fsync of " + log_path_.string() + " failed: " + std::strerror(errno));
}

void Store::apply_line(const std::string& line) {
  const json event = json::parse(line);
  const std::string type = event.at("type").get<std::string>();
  Index& ix = *index_;
  if (type == "batch") {
    const std::string batch = event.at("batch").get<std::string>();
    if (ix.batches.contains(batch)) throw Error(Errc::data, "duplicate batch " + batch);
    std::vector<std::string> ids;
    for (const json& t : event.at("tasks")) {
      AnnotationTask task = codec::task(t);
      if (task.batch != batch) throw Error(Errc::data, "task " + task.task_id + " outside its batch");
      if (ix.tasks.contains(task.task_id)) throw Error(Errc::data, "duplicate task id " + task.task_id);
      ids.push_back(task.task_id);
      ix.tasks.emplace(task.task_id, std::move(task));
      ++ix.task_count;
    }
    ix.batches.emplace(batch, std::move(ids));
    ix.batch_order.push_back(batch);
    ++ix.batch_count;
  } else if (type == "verdict") {
    Verdict v = codec::verdict(event.at("verdict"));
    if (!ix.tasks.contains(v.task_id)) throw Error(Errc::data, "verdict for unknown task " + v.task_id);
    ix.latest[{v.task_id, v.annotator_id}] = ix.log.size();
    ix.log.push_back(std::move(v));
  } else {
    throw Error(Errc::data, "unknown event type '" + type + "'");
  }
}

BatchResult Store::create_batch(const BatchRequest& request) {
  const bool natural = request.kind == TaskKind::naturalness;
  const std::size_t count = natural ? request.naturalness.size() : request.quality.size();
  if (count == 0) throw Error(Errc::invalid_argument, "batch has no items");
  if ((natural ? request.quality.size() : request.naturalness.size()) != 0)
    throw Error(Errc::invalid_argument, "batch items do not match its kind");
  if (request.batch_key && request.batch_key->empty())
    throw Error(Errc::invalid_argument, "batch_key must not be empty");

  std::unique_lock lock(mutex_);
  Index& ix = *index_;

  if (request.batch_key) {
    if (const auto it = ix.batches.find(*request.batch_key); it != ix.batches.end()) {
      const auto& ids = it->second;
      bool same = ids.size() == count;
      for (std::size_t i = 0; same && i < count; ++i) {
        const AnnotationTask& t = ix.tasks.at(ids[i]);
        same = t.kind == request.kind &&
               (natural ? t.naturalness == request.naturalness[i] : t.quality == request.quality[i]);
      }
      if (!same)
        throw Error(Errc::conflict, "batch_key '" + *request.batch_key + "' already used for different items");
      BatchResult result{it->first, {}, false};
      for (const auto& id : ids) result.tasks.push_back(ix.view(ix.tasks.at(id)));
      return result;
    }
  }

  std::string batch;
  if (request.batch_key) {
    batch = *request.batch_key;
  } else {
    std::size_t n = ix.batch_count + 1;
    while (ix.batches.contains(numbered('B', n))) ++n;
    batch = numbered('B', n);
  }

  BatchResult result{batch, {}, true};
  json tasks = json::array();
  for (std::size_t i = 0; i < count; ++i) {
    AnnotationTask t;
    t.task_id = numbered('T', ix.task_count + 1 + i);
    t.batch = batch;
    t.kind = request.kind;
    if (natural) t.naturalness = request.naturalness[i];
    else t.quality = request.quality[i];
    tasks.push_back(codec::to_json(t));
    result.tasks.push_back(std::move(t));
  }
  const std::string line = json{{"type", "batch"}, {"batch", batch}, {"tasks", tasks}}.dump();
  append(line);
  apply_line(line);
  return result;
}

std::optional<AnnotationTask> Store::next_task(TaskKind kind, std::string_view annotator_id) const {
  std::shared_lock lock(mutex_);
  for (const auto& [id, t] : index_->tasks) {
    if (t.kind == kind && !index_->answered(id, annotator_id)) return index_->view(t);
  }
  return std::nullopt;
}

Verdict Store::submit_verdict(Verdict v) {
  if (v.annotator_id.empty()) throw Error(Errc::invalid_argument, "annotator_id must not be empty");
  if (v.timestamp < 0) throw Error(Errc::invalid_argument, "timestamp must be non-negative");
  if (v.rating && (*v.rating < 1 || *v.rating > 5))
    throw Error(Errc::invalid_argument, "rating " + std::to_string(*v.rating) + " outside 1..5");

  std::unique_lock lock(mutex_);
  const auto it = index_->tasks.find(v.task_id);
  if (it == index_->tasks.end()) throw Error(Errc::not_found, "unknown task '" + v.task_id + "'");
  const bool quality_fields = v.adequacy || v.fluency || v.image_need;
  if (it->second.kind == TaskKind::naturalness) {
    if (!v.rating) throw Error(Errc::invalid_argument, "naturalness verdict needs a rating");
    if (quality_fields) throw Error(Errc::invalid_argument, "naturalness verdict takes only a rating");
  } else {
    if (v.rating) throw Error(Errc::invalid_argument, "quality verdict takes no rating");
    if (!v.adequacy || !v.fluency || !v.image_need)
      throw Error(Errc::invalid_argument, "quality verdict needs adequacy, fluency and image_need");
  }
  if (v.timestamp == 0) v.timestamp = static_cast<std::int64_t>(std::time(nullptr));

  const std::string line = json{{"type", "verdict"}, {"verdict", codec::to_json(v)}}.dump();
  append(line);
  apply_line(line);
  return v;
}

std::optional<AnnotationTask> Store::task(std::string_view task_id) const {
  std::shared_lock lock(mutex_);
  const auto it = index_->tasks.find(task_id);
  if (it == index_->tasks.end()) return std::nullopt;
  return index_->view(it->second);
}

std::vector<AnnotationTask> Store::tasks() const {
  std::shared_lock lock(mutex_);
  std::vector<AnnotationTask> out;
  for (const auto& [id, t] : index_->tasks) out.push_back(index_->view(t));
  return out;
}

std::vector<std::string> Store::batches() const {
  std::shared_lock lock(mutex_);
  return index_->batch_order;
}

std::vector<Verdict> Store::verdicts() const {
  std::shared_lock lock(mutex_);
  return index_->log;
}

QualityReport Store::aggregate_quality(const QualityFilter& filter) const {
  std::shared_lock lock(mutex_);
  std::vector<std::size_t> adequacy(3), fluency(3), need(4);
  QualityReport r;
  for (const auto& [key, pos] : index_->latest) {
    const AnnotationTask& t = index_->tasks.at(key.first);
    if (t.kind != TaskKind::quality) continue;
    if (filter.subset && t.quality.subset != *filter.subset) continue;
    const Verdict& v = index_->log[pos];
    ++need[static_cast<std::size_t>(*v.image_need)];
    ++r.image_need_verdicts;
    if (filter.language && t.quality.language != *filter.language) continue;
    ++adequacy[static_cast<std::size_t>(*v.adequacy)];
    ++fluency[static_cast<std::size_t>(*v.fluency)];
    ++r.verdicts;
  }
  if (r.verdicts == 0) throw Error(Errc::not_found, "no quality verdicts match the filter");
  const auto a = percentages(adequacy), f = percentages(fluency), n = percentages(need);
  std::copy(a.begin(), a.end(), r.adequacy.begin());
  std::copy(f.begin(), f.end(), r.fluency.begin());
  std::copy(n.begin(), n.end(), r.image_need.begin());
  return r;
}

NaturalnessReport Store::aggregate_naturalness(std::string_view batch) const {
  std::shared_lock lock(mutex_);
  const auto it = index_->batches.find(batch);
  if (it == index_->batches.end()) throw Error(Errc::not_found, "unknown batch '" + std::string(batch) + "'");
  NaturalnessReport r{std::string(batch), it->second.size(), 0, 0.0};
  long long sum = 0;
  std::size_t unanswered = 0;
  for (const auto& id : it->second) {
    if (index_->tasks.at(id).kind != TaskKind::naturalness)
      throw Error(Errc::invalid_argument, "batch '" + std::string(batch) + "' is not a naturalness batch");
    std::size_t here = 0;
    for (auto v = index_->latest.lower_bound({id, std::string()}); v != index_->latest.end() && v->first.first == id;
         ++v) {
      sum += *index_->log[v->second].rating;
      ++here;
    }
    r.ratings += here;
    unanswered += here == 0 ? 1 : 0;
  }
  if (unanswered)
    throw Error(Errc::state, std::to_string(unanswered) + " of " + std::to_string(r.tasks) + " tasks in batch '" +
                                 std::string(batch) + "' are unanswered");
  r.mean = static_cast<double>(sum) / static_cast<double>(r.ratings);
  return r;
}

}  // namespace mmtlab::annotate
