#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace mrs {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor-core errors.
class DimensionError : public Error { using Error::Error; };
class ParameterError : public Error { using Error::Error; };
class DegenerateBatchError : public Error { using Error::Error; };
class LabelError : public Error { using Error::Error; };
class NumericalError : public Error { using Error::Error; };

// Model-zoo errors.
class ArchitectureError : public Error { using Error::Error; };
class DatasetError : public Error { using Error::Error; };
class FormatError : public Error { using Error::Error; };
class TruncationError : public Error { using Error::Error; };
class ShapeMismatchError : public Error { using Error::Error; };

// Data ingest.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  explicit ParseError(const std::string& what) : Error(what) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_ = 0;
};
class RangeError : public Error { using Error::Error; };

// Face pipeline.
class ImageDecodeError : public Error { using Error::Error; };
class NoFaceError : public Error { using Error::Error; };

// Recommender.
class ValidationError : public Error { using Error::Error; };
class MissingKeyError : public ValidationError {
 public:
  MissingKeyError(const std::string& what, std::string key) : ValidationError(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};
class DuplicateKeyError : public ValidationError {
 public:
  DuplicateKeyError(const std::string& what, std::string key) : ValidationError(what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

// Streaming-service client.
class CredentialError : public Error { using Error::Error; };
class TransportError : public Error { using Error::Error; };
class ProtocolError : public Error { using Error::Error; };
class RateLimitError : public Error { using Error::Error; };
class PlaylistNotFoundError : public Error {
 public:
  explicit PlaylistNotFoundError(std::string id)
      : Error("playlist not found: " + id), playlist_id_(std::move(id)) {}
  const std::string& playlist_id() const { return playlist_id_; }

 private:
  std::string playlist_id_;
};

// Service / CLI configuration.
class ConfigError : public Error { using Error::Error; };

}  // namespace mrs
