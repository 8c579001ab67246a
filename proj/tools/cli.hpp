#pragma once

#include <iosfwd>

namespace voltstab {

/// Exit codes: 0 success, 1 failed certificate, 2 usage error (bad flags,
/// unreadable or malformed files), 3 runtime failure. Errors are reported on
/// `err` as one line: "error: <usage|runtime>: <message>".
int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace voltstab
