#include "twintest/telemetry.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstring>
#include <thread>

#include "json.hpp"
#include "twintest/error.hpp"

namespace twintest {

namespace {

[[noreturn]] void fail(ErrorCode code, const std::string& msg) { throw Error(code, msg); }

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

std::optional<int> parse_positive(std::string_view s) {
  if (s.empty() || s.front() == '0') return std::nullopt;
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

std::string render_tag(const Tag& t) {
  return std::visit(
      overloaded{
          [](const tag::ZonePower& p) { return "power.z" + std::to_string(p.zone); },
          [](const tag::SensorTemp& s) { return "temp." + s.sensor.name(); },
          [](const tag::HeadPosition&) { return std::string("pos.head"); },
          [](const tag::BackPosition&) { return std::string("pos.back"); },
          [](const tag::Speed&) { return std::string("speed"); },
          [](const tag::HoldingIndicator&) { return std::string("mode.holding"); },
      },
      t);
}

std::optional<Tag> parse_tag(std::string_view text) {
  if (text == "pos.head") return tag::HeadPosition{};
  if (text == "pos.back") return tag::BackPosition{};
  if (text == "speed") return tag::Speed{};
  if (text == "mode.holding") return tag::HoldingIndicator{};
  if (text.starts_with("power.z")) {
    if (auto zone = parse_positive(text.substr(7))) return tag::ZonePower{*zone};
    return std::nullopt;
  }
  if (text.starts_with("temp.")) {
    if (auto id = SensorId::parse(text.substr(5))) return tag::SensorTemp{*id};
  }
  return std::nullopt;
}

TagSchema::TagSchema(const FurnaceLayout& layout) : zones_(layout.zones) {
  for (const auto& s : layout.sensors) sensors_.push_back(s.id);
}

bool TagSchema::accepts(const Tag& t) const {
  if (const auto* p = std::get_if<tag::ZonePower>(&t)) return p->zone >= 1 && p->zone <= zones_;
  if (const auto* s = std::get_if<tag::SensorTemp>(&t)) {
    return std::binary_search(sensors_.begin(), sensors_.end(), s->sensor);
  }
  return true;
}

std::string format_number(double v) {
  std::array<char, 64> buf{};
  // Whole numbers such as epoch timestamps stay in plain notation.
  const bool whole = std::isfinite(v) && std::abs(v) < 1e16 && v == std::trunc(v);
  auto [ptr, ec] = whole ? std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::fixed)
                         : std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc{}) fail(ErrorCode::kNonFiniteValue, "cannot format number");
  return std::string(buf.data(), ptr);
}

std::string render_record(const TelemetryRecord& r) {
  std::string out;
  out.reserve(64);
  out += "{\"ts\": ";
  out += format_number(r.ts);
  out += ", \"tag\": \"";
  out += render_tag(r.tag);
  out += "\", \"value\": ";
  out += format_number(r.value);
  out += '}';
  return out;
}

TelemetryRecord parse_record(std::string_view line, const TagSchema& schema) {
  nlohmann::json obj;
  try {
    obj = nlohmann::json::parse(line.begin(), line.end());
  } catch (const nlohmann::json::out_of_range&) {
    fail(ErrorCode::kNonFiniteValue, "non-finite number");
  } catch (const nlohmann::json::exception&) {
    fail(ErrorCode::kMalformedLine, "not a valid object");
  }
  if (!obj.is_object()) fail(ErrorCode::kMalformedLine, "not a valid object");

  auto number_field = [&](const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(ErrorCode::kMissingField, std::string("missing field '") + key + "'");
    if (!it->is_number()) fail(ErrorCode::kMalformedLine, std::string("field '") + key + "' is not a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) fail(ErrorCode::kNonFiniteValue, std::string("field '") + key + "' is not finite");
    return v;
  };

  TelemetryRecord r;
  r.ts = number_field("ts");
  auto tag_it = obj.find("tag");
  if (tag_it == obj.end()) fail(ErrorCode::kMissingField, "missing field 'tag'");
  if (!tag_it->is_string()) fail(ErrorCode::kMalformedLine, "field 'tag' is not a string");
  const auto& tag_text = tag_it->get_ref<const std::string&>();
  auto parsed = parse_tag(tag_text);
  if (!parsed || !schema.accepts(*parsed)) fail(ErrorCode::kUnknownTag, "unknown tag '" + tag_text + "'");
  r.tag = *parsed;
  r.value = number_field("value");
  if (std::holds_alternative<tag::HoldingIndicator>(r.tag) && r.value != 0.0 && r.value != 1.0) {
    fail(ErrorCode::kMalformedLine, "holding indicator must be 0 or 1");
  }
  return r;
}

std::optional<TelemetryRecord> RecordSource::accept_line(std::string_view line,
                                                         const TagSchema& schema) {
  ++lines_read_;
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  if (line.find_first_not_of(" \t") == std::string_view::npos) return std::nullopt;
  try {
    return parse_record(line, schema);
  } catch (const Error& e) {
    failures_.push_back({lines_read_, e.what()});
    return std::nullopt;
  }
}

FileReplaySource::FileReplaySource(const std::string& path, TagSchema schema)
    : in_(path), schema_(std::move(schema)) {
  if (!in_) fail(ErrorCode::kIoError, "cannot open telemetry file '" + path + "'");
}

std::optional<TelemetryRecord> FileReplaySource::next() {
  while (std::getline(in_, line_)) {
    if (auto r = accept_line(line_, schema_)) return r;
  }
  if (in_.bad()) fail(ErrorCode::kIoError, "read error on telemetry file");
  return std::nullopt;
}

PacedReplaySource::PacedReplaySource(const std::string& path, TagSchema schema, double speedup)
    : FileReplaySource(path, std::move(schema)), speedup_(speedup) {
  if (!(speedup > 0.0) || !std::isfinite(speedup)) {
    fail(ErrorCode::kInvalidParameter, "paced replay speed-up must be positive");
  }
}

std::optional<TelemetryRecord> PacedReplaySource::next() {
  auto r = FileReplaySource::next();
  if (!r) return r;
  if (!first_ts_) {
    first_ts_ = r->ts;
    start_ = Clock::now();
    return r;
  }
  const double offset = std::max(0.0, (r->ts - *first_ts_) / speedup_);
  const auto due = start_ + std::chrono::duration_cast<Clock::duration>(
                                std::chrono::duration<double>(offset));
  std::this_thread::sleep_until(due);
  return r;
}

SocketSource::SocketSource(const std::string& host, std::uint16_t port, TagSchema schema)
    : schema_(std::move(schema)) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  if (getaddrinfo(host.c_str(), service.c_str(), &hints, &res) != 0 || res == nullptr) {
    fail(ErrorCode::kIoError, "cannot resolve " + host);
  }
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd_ < 0) continue;
    if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd_);
    fd_ = -1;
  }
  freeaddrinfo(res);
  if (fd_ < 0) fail(ErrorCode::kIoError, "cannot connect to " + host + ":" + service);
}

SocketSource::~SocketSource() {
  if (fd_ >= 0) ::close(fd_);
}

bool SocketSource::read_line(std::string& out) {
  while (true) {
    const auto nl = buffer_.find('\n', offset_);
    if (nl != std::string::npos) {
      out.assign(buffer_, offset_, nl - offset_);
      offset_ = nl + 1;
      return true;
    }
    if (eof_) {
      if (offset_ < buffer_.size()) {
        out.assign(buffer_, offset_);
        offset_ = buffer_.size();
        return true;
      }
      return false;
    }
    buffer_.erase(0, offset_);
    offset_ = 0;
    char chunk[65536];
    const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIoError, std::string("socket read failed: ") + std::strerror(errno));
    }
    if (n == 0) {
      eof_ = true;
    } else {
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }
}

std::optional<TelemetryRecord> SocketSource::next() {
  std::string line;
  while (read_line(line)) {
    if (auto r = accept_line(line, schema_)) return r;
  }
  return std::nullopt;
}

SourceSpec SourceSpec::parse(std::string_view text) {
  SourceSpec spec;
  auto bad = [&] { fail(ErrorCode::kConfigError, "bad source spec '" + std::string(text) + "'"); };
  if (text.starts_with("file:")) {
    spec.kind = Kind::kFile;
    spec.path = std::string(text.substr(5));
    if (spec.path.empty()) bad();
  } else if (text.starts_with("paced:")) {
    spec.kind = Kind::kPaced;
    auto rest = text.substr(6);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) bad();
    spec.path = std::string(rest.substr(0, colon));
    auto factor = rest.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(factor.data(), factor.data() + factor.size(), spec.speedup);
    if (ec != std::errc{} || ptr != factor.data() + factor.size() || !(spec.speedup > 0.0)) bad();
  } else if (text.starts_with("tcp:")) {
    spec.kind = Kind::kSocket;
    auto rest = text.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string_view::npos || colon == 0) bad();
    spec.host = std::string(rest.substr(0, colon));
    auto port = parse_positive(rest.substr(colon + 1));
    if (!port || *port > 65535) bad();
    spec.port = static_cast<std::uint16_t>(*port);
  } else {
    bad();
  }
  return spec;
}

std::unique_ptr<RecordSource> open_source(const SourceSpec& spec, const TagSchema& schema) {
  switch (spec.kind) {
    case SourceSpec::Kind::kFile:
      return std::make_unique<FileReplaySource>(spec.path, schema);
    case SourceSpec::Kind::kPaced:
      return std::make_unique<PacedReplaySource>(spec.path, schema, spec.speedup);
    case SourceSpec::Kind::kSocket:
      return std::make_unique<SocketSource>(spec.host, spec.port, schema);
  }
  fail(ErrorCode::kConfigError, "unknown source kind");
}

LineServer::LineServer(std::uint16_t port) {
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) fail(ErrorCode::kIoError, "cannot create socket");
  const int yes = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_ANY);
  addr.sin_port = htons(port);
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
      ::listen(listen_fd_, 1) != 0) {
    ::close(listen_fd_);
    fail(ErrorCode::kIoError, "cannot listen on port " + std::to_string(port));
  }
  socklen_t len = sizeof(addr);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
}

LineServer::~LineServer() {
  close_client();
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void LineServer::accept_client() {
  do {
    client_fd_ = ::accept(listen_fd_, nullptr, nullptr);
  } while (client_fd_ < 0 && errno == EINTR);
  if (client_fd_ < 0) fail(ErrorCode::kIoError, "accept failed");
}

void LineServer::write_line(std::string_view line) {
  if (client_fd_ < 0) fail(ErrorCode::kIoError, "no client connected");
  pending_.append(line);
  pending_.push_back('\n');
  if (pending_.size() < 32768) return;
  std::size_t sent = 0;
  while (sent < pending_.size()) {
    const ssize_t n = ::send(client_fd_, pending_.data() + sent, pending_.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(ErrorCode::kIoError, "client disconnected");
    }
    sent += static_cast<std::size_t>(n);
  }
  pending_.clear();
}

void LineServer::close_client() {
  if (client_fd_ < 0) return;
  std::size_t sent = 0;
  while (sent < pending_.size()) {
    const ssize_t n = ::send(client_fd_, pending_.data() + sent, pending_.size() - sent, MSG_NOSIGNAL);
    if (n <= 0) {
      if (n < 0 && errno == EINTR) continue;
      break;
    }
    sent += static_cast<std::size_t>(n);
  }
  pending_.clear();
  ::close(client_fd_);
  client_fd_ = -1;
}

}  // namespace twintest
