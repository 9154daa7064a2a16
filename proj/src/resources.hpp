#pragma once

#include <optional>
#include <string_view>

// Data files embedded at build time (see src/CMakeLists.txt).
namespace tfw::resources {

std::string_view schemas_yaml();

/// Contents of templates/<relative_path>, if shipped.
std::optional<std::string_view> template_file(std::string_view relative_path);

}  // namespace tfw::resources
