#include "rculab/errors.hpp"

namespace rculab {

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::SlotExhausted: return "SlotExhausted";
    case Errc::NestedReadSection: return "NestedReadSection";
    case Errc::SelfDeadlock: return "SelfDeadlock";
    case Errc::DuplicateKey: return "DuplicateKey";
    case Errc::KeyNotFound: return "KeyNotFound";
    case Errc::DoubleFree: return "DoubleFree";
    case Errc::UnknownBlock: return "UnknownBlock";
    case Errc::InvalidCount: return "InvalidCount";
    case Errc::ConfigError: return "ConfigError";
    case Errc::Deadlock: return "Deadlock";
  }
  return "Error";
}

}  // namespace rculab
