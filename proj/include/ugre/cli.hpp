#pragma once
// The `ugre` command line: build-graph, search-paths, gen-synthetic, train,
// eval, gradcheck and bias-report.
//
// Exit status: 0 on success or --help, 1 on runtime or configuration errors,
// 2 on usage errors.

#include <iosfwd>
#include <string>
#include <vector>

namespace ugre {

int cli_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
// argv[0] is supplied.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ugre
