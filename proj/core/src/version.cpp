#include "wasecom/version.hpp"

#ifndef WASECOM_VERSION_STRING
#define WASECOM_VERSION_STRING "unknown"
#endif

namespace wasecom {

const char* version_string() { return WASECOM_VERSION_STRING; }

}  // namespace wasecom
