#pragma once

#include <stdexcept>
#include <string>

namespace paqa {

// Base for everything this library throws on its own behalf.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad user input: config files, CLI arguments, missing environment.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Corpus/label/question file problems (IO, malformed lines, duplicate ids).
class CorpusError : public Error {
 public:
  using Error::Error;
};

// Retryable backend failure (timeout, 429, 5xx). Internal to the retry loop.
class TransientError : public Error {
 public:
  using Error::Error;
};

// Transport failure that survived all retries.
class TransportError : public Error {
 public:
  using Error::Error;
};

// The provider answered, but with an error payload or an unusable body.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// Prompt does not fit the model's context window.
class BudgetError : public Error {
 public:
  using Error::Error;
};

}  // namespace paqa
