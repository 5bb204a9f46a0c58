#pragma once

// Textual wire protocol over a loopback stream socket. Framing:
//
//   <METHOD> <path>[?k=v&k=v]\n
//   content-length: <N>\n
//   \n
//   <N body bytes>
//
// Responses use constrained-application response codes as the status line
// ("2.01 Created 7", "2.05 Content", "4.00 Bad Request <reason>") with the
// same content-length framing.

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstring>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cpus/errors.hpp"
#include "cpus/registry.hpp"
#include "cpus/service_model.hpp"

namespace cpus {

struct WireRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> params;
    std::string body;

    std::string param(const std::string& key, const std::string& fallback = "") const {
        auto it = params.find(key);
        return it == params.end() ? fallback : it->second;
    }
};

struct WireResponse {
    std::string status;  // full status line, e.g. "2.05 Content"
    std::string body;

    bool ok() const { return !status.empty() && status[0] == '2'; }
};

namespace wire {

inline std::string encode_request(const WireRequest& req) {
    std::ostringstream os;
    os << req.method << " " << req.path;
    bool first = true;
    for (const auto& [k, v] : req.params) {
        os << (first ? "?" : "&") << k << "=" << v;
        first = false;
    }
    os << "\ncontent-length: " << req.body.size() << "\n\n" << req.body;
    return os.str();
}

inline std::string encode_response(const WireResponse& resp) {
    std::ostringstream os;
    os << resp.status << "\ncontent-length: " << resp.body.size() << "\n\n" << resp.body;
    return os.str();
}

inline WireRequest decode_request(const std::string& head, const std::string& body) {
    WireRequest req;
    auto space = head.find(' ');
    if (space == std::string::npos) throw WireError("malformed request line: " + head);
    req.method = head.substr(0, space);
    std::string target = head.substr(space + 1);
    auto qmark = target.find('?');
    req.path = target.substr(0, qmark);
    if (qmark != std::string::npos) {
        std::string qs = target.substr(qmark + 1);
        size_t pos = 0;
        while (pos < qs.size()) {
            size_t amp = qs.find('&', pos);
            std::string kv = qs.substr(pos, amp == std::string::npos ? std::string::npos
                                                                     : amp - pos);
            auto eq = kv.find('=');
            if (eq != std::string::npos) req.params[kv.substr(0, eq)] = kv.substr(eq + 1);
            if (amp == std::string::npos) break;
            pos = amp + 1;
        }
    }
    req.body = body;
    return req;
}

// Reads one frame (status/request line + content-length header + body).
inline std::pair<std::string, std::string> read_frame(int fd) {
    std::string buf;
    char chunk[4096];
    size_t header_end = std::string::npos;
    while (header_end == std::string::npos) {
        ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) throw WireError("connection closed while reading frame header");
        buf.append(chunk, static_cast<size_t>(n));
        header_end = buf.find("\n\n");
        if (buf.size() > 1 << 20) throw WireError("frame header too large");
    }
    std::string header = buf.substr(0, header_end);
    std::string rest = buf.substr(header_end + 2);

    auto eol = header.find('\n');
    std::string first = header.substr(0, eol);
    size_t length = 0;
    if (eol != std::string::npos) {
        std::string h = header.substr(eol + 1);
        const std::string key = "content-length:";
        if (h.rfind(key, 0) != 0) throw WireError("missing content-length header");
        try {
            length = std::stoul(h.substr(key.size()));
        } catch (const std::exception&) {
            throw WireError("malformed content-length header");
        }
    }
    while (rest.size() < length) {
        ssize_t n = ::recv(fd, chunk, sizeof(chunk), 0);
        if (n <= 0) throw WireError("connection closed while reading frame body");
        rest.append(chunk, static_cast<size_t>(n));
    }
    return {first, rest.substr(0, length)};
}

inline void send_all(int fd, const std::string& bytes) {
    size_t sent = 0;
    while (sent < bytes.size()) {
        ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, 0);
        if (n <= 0) throw WireError("connection closed while sending");
        sent += static_cast<size_t>(n);
    }
}

inline std::pair<std::string, uint16_t> parse_address(const std::string& addr) {
    auto colon = addr.find_last_of(':');
    if (colon == std::string::npos) throw WireError("address must be host:port, got " + addr);
    return {addr.substr(0, colon), static_cast<uint16_t>(std::stoi(addr.substr(colon + 1)))};
}

}  // namespace wire

/// One request per connection; requests are handled sequentially, so every
/// directory operation is totally ordered.
class WireServer {
public:
    using Handler = std::function<WireResponse(const WireRequest&)>;

    explicit WireServer(Handler handler) : handler_(std::move(handler)) {}
    ~WireServer() { stop(); }

    uint16_t start(uint16_t port = 0) {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw WireError("socket() failed");
        int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = htons(port);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            ::close(listen_fd_);
            listen_fd_ = -1;
            throw WireError("bind() failed on port " + std::to_string(port));
        }
        if (::listen(listen_fd_, 16) != 0) throw WireError("listen() failed");
        socklen_t len = sizeof(addr);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
        port_ = ntohs(addr.sin_port);
        running_ = true;
        thread_ = std::thread([this] { loop(); });
        return port_;
    }

    void stop() {
        if (!running_.exchange(false)) return;
        if (listen_fd_ >= 0) {
            ::shutdown(listen_fd_, SHUT_RDWR);
            ::close(listen_fd_);
            listen_fd_ = -1;
        }
        if (thread_.joinable()) thread_.join();
    }

    uint16_t port() const { return port_; }

private:
    void loop() {
        while (running_) {
            int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) break;
            timeval rcv{10, 0};  // a silent client must not wedge the server
            ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &rcv, sizeof(rcv));
            try {
                auto [head, body] = wire::read_frame(fd);
                WireResponse resp;
                try {
                    resp = handler_(wire::decode_request(head, body));
                } catch (const Error& e) {
                    resp = {"4.00 Bad Request " + std::string(e.what()), ""};
                } catch (const std::exception& e) {
                    resp = {"5.00 Internal Server Error " + std::string(e.what()), ""};
                }
                wire::send_all(fd, wire::encode_response(resp));
            } catch (const WireError&) {
                // dropped connection mid-frame; nothing to answer
            }
            ::close(fd);
        }
    }

    Handler handler_;
    std::thread thread_;
    std::atomic<bool> running_{false};
    int listen_fd_ = -1;
    uint16_t port_ = 0;
};

inline WireResponse wire_call(const std::string& host, uint16_t port, const WireRequest& req) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw WireError("socket() failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host == "localhost" ? "127.0.0.1" : host.c_str(), &addr.sin_addr) !=
        1) {
        ::close(fd);
        throw WireError("bad host: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd);
        throw RegistryUnreachable(host + ":" + std::to_string(port));
    }
    try {
        wire::send_all(fd, wire::encode_request(req));
        auto [status, body] = wire::read_frame(fd);
        ::close(fd);
        return {status, body};
    } catch (...) {
        ::close(fd);
        throw;
    }
}

// ---- CoRE-style link-format payloads ---------------------------------------

namespace wire {

inline std::string link_line(const ResourceLink& link, const std::string& ep = "") {
    std::string out = "<" + link.path + ">;rt=\"" + link.resource_type + "\"";
    if (!ep.empty()) out += ";ep=\"" + ep + "\"";
    return out;
}

inline std::pair<std::string, ResourceLink> parse_link_line(const std::string& line) {
    ResourceLink link;
    std::string ep;
    auto close = line.find('>');
    if (line.empty() || line[0] != '<' || close == std::string::npos)
        throw WireError("malformed link line: " + line);
    link.path = line.substr(1, close - 1);
    size_t pos = close + 1;
    while (pos < line.size() && line[pos] == ';') {
        auto eq = line.find("=\"", pos);
        if (eq == std::string::npos) break;
        std::string key = line.substr(pos + 1, eq - pos - 1);
        auto end = line.find('"', eq + 2);
        std::string value = line.substr(eq + 2, end - eq - 2);
        if (key == "rt") link.resource_type = value;
        if (key == "ep") ep = value;
        pos = end + 1;
    }
    return {ep, link};
}

// Registration / lookup payload: link lines, a blank line, then one N3
// description block per link separated by `---` lines.
inline std::string encode_links(const std::vector<std::pair<std::string, ResourceLink>>& items,
                                bool with_ep) {
    std::ostringstream os;
    for (const auto& [ep, link] : items) os << link_line(link, with_ep ? ep : "") << "\n";
    os << "\n";
    for (size_t i = 0; i < items.size(); i++) {
        if (i) os << "---\n";
        os << serialize_description(items[i].second.description);
    }
    return os.str();
}

inline std::vector<std::pair<std::string, ResourceLink>> decode_links(const std::string& body) {
    std::vector<std::pair<std::string, ResourceLink>> items;
    std::istringstream in(body);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) break;
        items.push_back(parse_link_line(line));
    }
    std::string rest((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<std::string> blocks;
    size_t pos = 0;
    while (pos <= rest.size()) {
        size_t sep = rest.find("\n---\n", pos);
        if (sep == std::string::npos) {
            blocks.push_back(rest.substr(pos));
            break;
        }
        blocks.push_back(rest.substr(pos, sep - pos));
        pos = sep + 5;
    }
    for (size_t i = 0; i < items.size() && i < blocks.size(); i++) {
        auto descs = parse_n3_description(blocks[i]);
        if (descs.size() == 1) items[i].second.description = descs[0];
    }
    return items;
}

}  // namespace wire

/// Routes wire requests onto a Registry.
class RegistryWireService {
public:
    explicit RegistryWireService(Registry& registry) : registry_(registry) {}

    WireResponse handle(const WireRequest& req) {
        if (req.method == "POST" && req.path == "/rd") {
            std::string ep = req.param("ep");
            if (ep.empty()) return bad("missing ep parameter");
            int64_t lifetime = kDefaultLifetimeS;
            if (!req.param("lt").empty()) lifetime = std::stoll(req.param("lt"));
            auto items = wire::decode_links(req.body);
            std::vector<ResourceLink> links;
            for (auto& [unused_ep, link] : items) links.push_back(link);
            std::string id = registry_.register_endpoint(ep, lifetime, std::move(links));
            return {"2.01 Created " + id, ""};
        }
        if (req.method == "GET" && req.path == "/rd-lookup/res") {
            auto rt = req.param("rt").empty() ? std::nullopt
                                              : std::optional<std::string>(req.param("rt"));
            return content(registry_.lookup(rt, nullptr));
        }
        if (req.method == "POST" && req.path == "/rd-lookup/query") {
            auto rt = req.param("rt").empty() ? std::nullopt
                                              : std::optional<std::string>(req.param("rt"));
            ServiceQuery query = parse_query(req.body);
            return content(registry_.lookup(rt, &query));
        }
        if (req.method == "POST" && req.path == "/rd-remove") {
            bool removed = registry_.remove(req.param("ep"));
            return removed ? WireResponse{"2.02 Deleted", ""}
                           : WireResponse{"4.04 Not Found", ""};
        }
        if (req.method == "POST" && req.path == "/rd-reserve") {
            registry_.reserve(req.param("ep"), req.param("holder"));
            return {"2.01 Created", ""};
        }
        if (req.method == "POST" && req.path == "/rd-release") {
            registry_.release(req.param("ep"), req.param("holder"));
            return {"2.02 Deleted", ""};
        }
        return bad("no such route: " + req.method + " " + req.path);
    }

private:
    static WireResponse bad(const std::string& reason) {
        return {"4.00 Bad Request " + reason, ""};
    }
    static WireResponse content(const std::vector<std::pair<std::string, ResourceLink>>& items) {
        return {"2.05 Content", wire::encode_links(items, true)};
    }

    Registry& registry_;
};

// Remote implementations of the registry access interfaces.

class WireServiceSource : public ServiceSource {
public:
    WireServiceSource(std::string host, uint16_t port) : host_(std::move(host)), port_(port) {}

    std::vector<std::pair<std::string, ResourceLink>> lookup(
        const std::optional<std::string>& resource_type, const ServiceQuery* query) override {
        WireRequest req;
        if (query) {
            req.method = "POST";
            req.path = "/rd-lookup/query";
            req.body = serialize_query(*query);
        } else {
            req.method = "GET";
            req.path = "/rd-lookup/res";
        }
        if (resource_type) req.params["rt"] = *resource_type;
        WireResponse resp = wire_call(host_, port_, req);
        if (!resp.ok()) throw WireError("lookup failed: " + resp.status);
        return wire::decode_links(resp.body);
    }

    void reserve(const std::string& worker, const std::string& holder) override {
        WireRequest req{"POST", "/rd-reserve", {{"ep", worker}, {"holder", holder}}, ""};
        WireResponse resp = wire_call(host_, port_, req);
        if (!resp.ok()) throw ReservationConflict(worker);
    }

    void release(const std::string& worker, const std::string& holder) override {
        WireRequest req{"POST", "/rd-release", {{"ep", worker}, {"holder", holder}}, ""};
        wire_call(host_, port_, req);
    }

private:
    std::string host_;
    uint16_t port_;
};

class WireRegistryLink : public RegistryLink {
public:
    WireRegistryLink(std::string host, uint16_t port) : host_(std::move(host)), port_(port) {}

    std::string register_endpoint(const std::string& endpoint_name, int64_t lifetime_s,
                                  std::vector<ResourceLink> links) override {
        WireRequest req;
        req.method = "POST";
        req.path = "/rd";
        req.params["ep"] = endpoint_name;
        req.params["lt"] = std::to_string(lifetime_s);
        std::vector<std::pair<std::string, ResourceLink>> items;
        for (auto& link : links) items.emplace_back(endpoint_name, link);
        req.body = wire::encode_links(items, false);
        WireResponse resp = wire_call(host_, port_, req);
        if (!resp.ok()) throw WireError("registration failed: " + resp.status);
        auto space = resp.status.find_last_of(' ');
        return resp.status.substr(space + 1);
    }

    void remove(const std::string& endpoint_name) override {
        WireRequest req{"POST", "/rd-remove", {{"ep", endpoint_name}}, ""};
        wire_call(host_, port_, req);
    }

private:
    std::string host_;
    uint16_t port_;
};

}  // namespace cpus
