#pragma once

#include <string>

#include "dn/story.hpp"
#include "dn/table.hpp"

namespace dn {

/// Version tag written into every document this library emits.
inline constexpr const char* kSchemaVersion = "dn/1";

/// Canonical JSON documents: UTF-8, two-space indent, fixed key order, so
/// serialization is byte-deterministic. deserialize(serialize(x)) is
/// structurally equal to x. Malformed input raises ParseError with a
/// line/column position where one is known.
std::string serialize_table_set(const DataTableSet& tables);
DataTableSet deserialize_table_set(const std::string& text);

std::string serialize_story(const DataStory& story);
DataStory deserialize_story(const std::string& text);

std::string serialize_trace(const PipelineTrace& trace);
PipelineTrace deserialize_trace(const std::string& text);

}  // namespace dn
