#pragma once

// JSON encoding shared by the store's event log and the HTTP service.

#include <json.hpp>

#include "mmtlab/annotate/store.hpp"

namespace mmtlab::annotate::codec {

using nlohmann::json;

json to_json(const NaturalnessItem& item);
json to_json(const QualityItem& item);
json to_json(const AnnotationTask& task);
json to_json(const Verdict& verdict);
json to_json(const QualityReport& report);
json to_json(const NaturalnessReport& report);

/// These throw Error(Errc::invalid_argument) naming the offending field.
NaturalnessItem naturalness_item(const json& j);
QualityItem quality_item(const json& j);
AnnotationTask task(const json& j);
Verdict verdict(const json& j);
BatchRequest batch_request(const json& j);

}  // namespace mmtlab::annotate::codec
