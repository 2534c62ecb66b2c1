#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

namespace mmtlab::annotate {

enum class TaskKind { naturalness, quality };
enum class TaskStatus { open, done };
enum class Grade { good, medium, bad };
enum class ImageNeed { yes, maybe, no, not_reflected };

const char* to_string(TaskKind k) noexcept;
const char* to_string(TaskStatus s) noexcept;
const char* to_string(Grade g) noexcept;
const char* to_string(ImageNeed n) noexcept;
TaskKind parse_task_kind(std::string_view s);
Grade parse_grade(std::string_view s);
/// Accepts "not_reflected" and "not reflected".
ImageNeed parse_image_need(std::string_view s);

struct NaturalnessItem {
  std::string original;
  std::string corrupted;

  friend bool operator==(const NaturalnessItem&, const NaturalnessItem&) = default;
};

struct QualityItem {
  std::string source;
  std::string target;
  std::string image;  // image id, resolved under the media root
  std::string subset;
  std::string language;

  friend bool operator==(const QualityItem&, const QualityItem&) = default;
};

struct AnnotationTask {
  std::string task_id;
  std::string batch;
  TaskKind kind = TaskKind::naturalness;
  NaturalnessItem naturalness;  // set when kind == naturalness
  QualityItem quality;          // set when kind == quality
  TaskStatus status = TaskStatus::open;

  friend bool operator==(const AnnotationTask&, const AnnotationTask&) = default;
};

struct Verdict {
  std::string task_id;
  std::string annotator_id;
  std::optional<int> rating;  // naturalness, 1..5
  std::optional<Grade> adequacy;
  std::optional<Grade> fluency;
  std::optional<ImageNeed> image_need;
  std::int64_t timestamp = 0;  // UTC seconds; 0 means "now" on submit

  friend bool operator==(const Verdict&, const Verdict&) = default;
};

struct BatchRequest {
  TaskKind kind = TaskKind::naturalness;
  std::vector<NaturalnessItem> naturalness;
  std::vector<QualityItem> quality;
  /// Resubmitting the same key with the same items returns the original tasks.
  std::optional<std::string> batch_key;
};

struct BatchResult {
  std::string batch;
  std::vector<AnnotationTask> tasks;
  bool created = true;
};

struct QualityFilter {
  std::optional<std::string> subset;
  std::optional<std::string> language;
};

struct QualityReport {
  std::size_t verdicts = 0;             // adequacy/fluency denominator
  std::size_t image_need_verdicts = 0;  // across languages
  std::array<double, 3> adequacy{};     // percent good, medium, bad
  std::array<double, 3> fluency{};
  std::array<double, 4> image_need{};  // percent yes, maybe, no, not_reflected
};

struct NaturalnessReport {
  std::string batch;
  std::size_t tasks = 0;
  std::size_t ratings = 0;
  double mean = 0.0;

  friend bool operator==(const NaturalnessReport&, const NaturalnessReport&) = default;
};

/// File-backed task/verdict store. Every mutation is appended to
/// `<dir>/events.jsonl` and fsynced before it becomes visible; opening the
/// directory replays the log. A torn final line (crash mid-write) is dropped.
///
/// Mutations are serialized; reads share a lock and may run concurrently.
class Store {
 public:
  explicit Store(const std::filesystem::path& dir);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const std::filesystem::path& log_path() const noexcept { return log_path_; }

  BatchResult create_batch(const BatchRequest& request);
  /// Lowest task id of `kind` this annotator has not answered yet.
  std::optional<AnnotationTask> next_task(TaskKind kind, std::string_view annotator_id) const;
  /// Returns the stored verdict (timestamp filled in).
  Verdict submit_verdict(Verdict verdict);

  std::optional<AnnotationTask> task(std::string_view task_id) const;
  std::vector<AnnotationTask> tasks() const;
  std::vector<std::string> batches() const;
  /// Every verdict in log order, superseded ones included.
  std::vector<Verdict> verdicts() const;

  /// Adequacy and fluency honour both filters; image need honours only the
  /// subset filter. Throws Error(Errc::not_found) when nothing matches.
  QualityReport aggregate_quality(const QualityFilter& filter) const;
  /// Mean of last-write-wins ratings. Throws Error(Errc::not_found) for an
  /// unknown batch and Error(Errc::state) while some task is unanswered.
  NaturalnessReport aggregate_naturalness(std::string_view batch) const;

 private:
  struct Index;

  void append(const std::string& line);
  void apply_line(const std::string& line);

  std::filesystem::path log_path_;
  int fd_ = -1;
  mutable std::shared_mutex mutex_;
  std::unique_ptr<Index> index_;
};

/// Independent of any store: percent of each value in `counts`.
std::vector<double> percentages(const std::vector<std::size_t>& counts);

}  // namespace mmtlab::annotate
