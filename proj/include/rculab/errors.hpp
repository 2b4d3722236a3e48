#pragma once

#include <stdexcept>
#include <string>

namespace rculab {

enum class Errc {
  SlotExhausted,
  NestedReadSection,
  SelfDeadlock,
  DuplicateKey,
  KeyNotFound,
  DoubleFree,
  UnknownBlock,
  InvalidCount,
  ConfigError,
  Deadlock,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

}  // namespace rculab
