#pragma once

namespace wasecom {

/// Project version plus `git describe` output when built from a checkout.
const char* version_string();

}  // namespace wasecom
