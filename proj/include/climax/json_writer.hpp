#ifndef CLIMAX_JSON_WRITER_HPP
#define CLIMAX_JSON_WRITER_HPP

#include <string>
#include <vector>

#include "climax/common.hpp"
#include "json.hpp"

namespace climax {

/// Streaming JSON emitter with a fixed key order and 17-digit floats, so
/// documents are byte-stable for a given input.
class JsonWriter {
 public:
  explicit JsonWriter(int indent = 2) : indent_(indent) {}

  JsonWriter& begin_object() { return open('{'); }
  JsonWriter& end_object() { return close('}'); }
  JsonWriter& begin_array() { return open('['); }
  JsonWriter& end_array() { return close(']'); }

  JsonWriter& key(const std::string& k) {
    separate();
    out_ += quote(k);
    out_ += ": ";
    pending_key_ = true;
    return *this;
  }

  JsonWriter& value(double v) { return raw(std::isfinite(v) ? format_double(v) : "null"); }
  JsonWriter& value(int v) { return raw(std::to_string(v)); }
  JsonWriter& value(long v) { return raw(std::to_string(v)); }
  JsonWriter& value(long long v) { return raw(std::to_string(v)); }
  JsonWriter& value(unsigned long v) { return raw(std::to_string(v)); }
  JsonWriter& value(unsigned long long v) { return raw(std::to_string(v)); }
  JsonWriter& value(bool v) { return raw(v ? "true" : "false"); }
  JsonWriter& value(const std::string& v) { return raw(quote(v)); }
  JsonWriter& value(const char* v) { return raw(quote(v)); }

  template <typename T>
  JsonWriter& field(const std::string& k, const T& v) {
    key(k);
    return value(v);
  }

  /// Numeric array written on one line.
  JsonWriter& inline_array(const Vector& v) {
    std::string s = "[";
    for (Index i = 0; i < v.size(); ++i) {
      if (i) s += ", ";
      s += std::isfinite(v(i)) ? format_double(v(i)) : "null";
    }
    return raw(s + "]");
  }
  JsonWriter& inline_array(const std::vector<int>& v) {
    std::string s = "[";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) s += ", ";
      s += std::to_string(v[i]);
    }
    return raw(s + "]");
  }

  const std::string& str() const { return out_; }

 private:
  static std::string quote(const std::string& s) { return nlohmann::json(s).dump(); }

  void newline() {
    out_ += '\n';
    out_.append(static_cast<std::size_t>(indent_) * first_.size(), ' ');
  }

  void separate() {
    if (pending_key_) {
      pending_key_ = false;
      return;
    }
    if (first_.empty()) return;
    if (!first_.back()) out_ += ',';
    first_.back() = false;
    newline();
  }

  JsonWriter& raw(const std::string& text) {
    separate();
    out_ += text;
    return *this;
  }

  JsonWriter& open(char c) {
    separate();
    out_ += c;
    first_.push_back(true);
    return *this;
  }

  JsonWriter& close(char c) {
    const bool empty = first_.back();
    first_.pop_back();
    if (!empty) newline();
    out_ += c;
    return *this;
  }

  int indent_;
  std::string out_;
  std::vector<bool> first_;
  bool pending_key_ = false;
};

}  // namespace climax

#endif  // CLIMAX_JSON_WRITER_HPP
