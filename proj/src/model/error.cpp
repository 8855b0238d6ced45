#include "cb/error.hpp"

namespace cb {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_spec: return "InvalidSpec";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::template_error: return "TemplateError";
    case Errc::submit_failed: return "SubmitFailed";
    case Errc::queue_closed: return "QueueClosed";
    case Errc::unknown_handle: return "UnknownHandle";
    case Errc::empty_input: return "EmptyInput";
    case Errc::invalid_point: return "InvalidPoint";
    case Errc::storage_full: return "StorageFull";
    case Errc::parse_error: return "ParseError";
    case Errc::invalid_query: return "InvalidQuery";
    case Errc::storage_error: return "StorageError";
    case Errc::unknown_record: return "UnknownRecord";
    case Errc::duplicate_link: return "DuplicateLink";
    case Errc::self_link: return "SelfLink";
    case Errc::unknown_collection: return "UnknownCollection";
    case Errc::collection_cycle: return "CollectionCycle";
    case Errc::unknown_bandwidth_kind: return "UnknownBandwidthKind";
    case Errc::zero_bound: return "ZeroBound";
    case Errc::zero_total: return "ZeroTotal";
    case Errc::insufficient_data: return "InsufficientData";
    case Errc::length_mismatch: return "LengthMismatch";
    case Errc::nonpositive_density: return "NonpositiveDensity";
    case Errc::instability: return "Instability";
    case Errc::subcritical_tau: return "SubcriticalTau";
    case Errc::no_jobs: return "NoJobs";
    case Errc::store_unavailable: return "StoreUnavailable";
    case Errc::not_found: return "NotFound";
  }
  return "Error";
}

}  // namespace cb
