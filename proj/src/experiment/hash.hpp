#pragma once

#include <string>

namespace fracbsde::experiment {

/// SHA-1 of "blob <size>\0<content>", as `git hash-object` prints it.
std::string git_blob_sha1(const std::string& content);

}  // namespace fracbsde::experiment
