#pragma once

#include "lyricpref/clients.hpp"
#include "lyricpref/config.hpp"
#include "lyricpref/extraction.hpp"
#include "lyricpref/mock.hpp"

#include <iosfwd>
#include <memory>

namespace lyricpref {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitProvider = 2, kExitInternal = 3 };

// Provider clients wired to one cached transport: the offline mock or the
// configured HTTP endpoint.
struct ProviderBundle {
    std::shared_ptr<MockTransport> mock; // set in offline mode
    std::shared_ptr<Transport> upstream;
    std::shared_ptr<CachedTransport> cached;
    ExtractionProviders extraction;
    std::shared_ptr<Embedder> embedder;
    std::shared_ptr<ChatModel> chat;
};

ProviderBundle make_providers(const WorkspaceConfig& config);

// ISO-8601 UTC. An explicit value wins, then SOURCE_DATE_EPOCH, then the
// epoch in offline mode (so offline runs are byte-reproducible), then now.
std::string resolve_timestamp(const std::string& explicit_value, bool offline);

// Entry point behind the lyricpref binary; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

} // namespace lyricpref
