#include "dfp/memory.hpp"

namespace dfp {

MemConfig MemConfig::acp() { return MemConfig{}; }

MemConfig MemConfig::hp() {
  MemConfig c;
  c.miss_latency = 130;
  return c;
}

std::string MemConfig::check() const {
  if (hit_latency < 0 || miss_latency < 0) return "latencies must be non-negative";
  if (hit_latency > miss_latency) return "hit_latency exceeds miss_latency";
  if (line_bytes <= 0) return "line_bytes must be positive";
  if (ways <= 0) return "ways must be positive";
  if (cache_bytes % (line_bytes * ways) != 0)
    return "cache_bytes must be divisible by line_bytes * ways";
  if (max_outstanding < 1) return "max_outstanding must be at least 1";
  if (burst_max < 1) return "burst_max must be at least 1";
  return "";
}

std::vector<MemRequest> coalesce(const AccessTrace& trace, int burst_max) {
  std::vector<MemRequest> out;
  for (const Access& a : trace) {
    if (!out.empty()) {
      MemRequest& r = out.back();
      if (r.space == a.space && r.is_store == a.is_store &&
          a.addr == r.addr + r.len && r.len < burst_max) {
        ++r.len;
        continue;
      }
    }
    out.push_back(MemRequest{a.space, a.addr, 1, a.is_store});
  }
  return out;
}

LruCache::LruCache(int cache_bytes, int line_bytes, int ways) : ways_(ways) {
  int sets = cache_bytes / (line_bytes * ways);
  if (sets < 1) sets = 1;
  tags_.resize(static_cast<size_t>(sets));
}

bool LruCache::lookup(int64_t line) {
  auto& set = tags_[static_cast<size_t>(line % sets())];
  for (size_t i = 0; i < set.size(); ++i) {
    if (set[i] == line) {
      set.erase(set.begin() + static_cast<long>(i));
      set.insert(set.begin(), line);
      return true;
    }
  }
  return false;
}

void LruCache::fill(int64_t line) {
  auto& set = tags_[static_cast<size_t>(line % sets())];
  set.insert(set.begin(), line);
  if (static_cast<int>(set.size()) > ways_) set.pop_back();
}

bool LruCache::access(int64_t line) {
  if (lookup(line)) return true;
  fill(line);
  return false;
}

MemSystem::MemSystem(const MemConfig& cfg, const Program& p) : cfg_(cfg) {
  for (const MemSpace& s : p.spaces) elem_bytes_.push_back(s.element_width);
}

int MemSystem::open_port(int space, PortPolicy policy) {
  Port port;
  port.space = space;
  port.policy = policy;
  if (policy == PortPolicy::Cached)
    port.cache.emplace(cfg_.cache_bytes, cfg_.line_bytes, cfg_.ways);
  ports_.push_back(std::move(port));
  return static_cast<int>(ports_.size()) - 1;
}

void MemSystem::close_burst(Port& p) {
  if (!p.burst.open) return;
  closed_.push(p.burst.ready0 + p.burst.len - 1);
  p.burst.open = false;
}

void MemSystem::retire(int64_t now) {
  while (!closed_.empty() && closed_.top() <= now) closed_.pop();
  for (Port& p : ports_)
    if (p.burst.open && p.burst.ready0 + p.burst.len - 1 <= now) p.burst.open = false;
}

int64_t MemSystem::in_flight(int64_t now) {
  retire(now);
  int64_t n = static_cast<int64_t>(closed_.size());
  for (const Port& p : ports_)
    if (p.burst.open) ++n;
  return n;
}

bool MemSystem::can_accept(int64_t now) {
  return in_flight(now) < cfg_.max_outstanding;
}

std::optional<int64_t> MemSystem::access(int port, int64_t elem, bool is_store,
                                         int64_t now) {
  Port& p = ports_[static_cast<size_t>(port)];

  if (p.policy == PortPolicy::UncachedBurst) {
    // An open burst absorbs the next consecutive element for free; the
    // element's data rides beat (len) of the transaction.
    if (p.burst.open && p.burst.store == is_store && elem == p.burst.next_elem &&
        p.burst.len < cfg_.burst_max) {
      int64_t ready = p.burst.ready0 + p.burst.len;
      ++p.burst.len;
      ++p.burst.next_elem;
      ++p.st.accesses;
      p.st.stores += is_store;
      ++st_.accesses;
      return ready;
    }
    close_burst(p);
    if (!can_accept(now)) {
      ++st_.credit_stalls;
      return std::nullopt;
    }
    p.burst =
        Burst{/*open=*/true, is_store, elem + 1, now + cfg_.miss_latency, /*len=*/1};
    ++p.st.accesses;
    ++p.st.requests;
    p.st.stores += is_store;
    ++st_.accesses;
    ++st_.requests;
    int64_t f = in_flight(now);
    if (f > st_.peak_in_flight) st_.peak_in_flight = f;
    return p.burst.ready0;
  }

  int bytes = elem_bytes_[static_cast<size_t>(p.space)];
  int64_t line = elem * bytes / cfg_.line_bytes;
  if (cfg_.cache_enabled && p.cache->lookup(line)) {
    ++p.st.accesses;
    ++p.st.hits;
    p.st.stores += is_store;
    ++st_.accesses;
    ++st_.hits;
    return now + cfg_.hit_latency;
  }
  if (!can_accept(now)) {
    ++st_.credit_stalls;
    return std::nullopt;
  }
  if (cfg_.cache_enabled) p.cache->fill(line);
  ++p.st.accesses;
  ++p.st.misses;
  ++p.st.requests;
  p.st.stores += is_store;
  ++st_.accesses;
  ++st_.misses;
  ++st_.requests;
  int64_t done = now + cfg_.miss_latency;
  closed_.push(done);
  int64_t f = in_flight(now);
  if (f > st_.peak_in_flight) st_.peak_in_flight = f;
  return done;
}

}  // namespace dfp
