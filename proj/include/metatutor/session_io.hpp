#pragma once

#include <filesystem>
#include <vector>

#include "metatutor/tutor_sim.hpp"

namespace metatutor {

/// One JSON object per line, one line per session; round-trips exactly.
void store_sessions(const std::vector<SessionLog>& sessions, const std::filesystem::path& path);
std::vector<SessionLog> load_sessions(const std::filesystem::path& path);

}  // namespace metatutor
