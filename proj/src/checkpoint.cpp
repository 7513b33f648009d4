#include <cstring>
#include <fstream>
#include <iterator>

#include "gridfase/dqn.hpp"
#include "gridfase/errors.hpp"

namespace gridfase::agent {

namespace {

constexpr char kMagic[8] = {'G', 'F', 'A', 'S', 'E', 'Q', 'N', '1'};
constexpr std::uint32_t kVersion = 1;

class Writer {
public:
    template <class T>
    void put(const T& v) {
        const auto* p = reinterpret_cast<const char*>(&v);
        bytes_.insert(bytes_.end(), p, p + sizeof(T));
    }
    void put_doubles(std::span<const double> v) {
        put<std::uint64_t>(v.size());
        const auto* p = reinterpret_cast<const char*>(v.data());
        bytes_.insert(bytes_.end(), p, p + v.size() * sizeof(double));
    }
    std::vector<char>& bytes() { return bytes_; }

private:
    std::vector<char> bytes_;
};

class Reader {
public:
    Reader(const std::vector<char>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

    template <class T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    std::vector<double> get_doubles() {
        const auto n = get<std::uint64_t>();
        if (n > (end_ - pos_) / sizeof(double)) throw ChecksumMismatch("checkpoint truncated");
        std::vector<double> v(n);
        std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return v;
    }
    bool done() const { return pos_ == end_; }

private:
    void need(std::size_t n) const {
        if (end_ - pos_ < n) throw ChecksumMismatch("checkpoint truncated");
    }
    const std::vector<char>& bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

}  // namespace

void save_agent(const Agent& agent, const std::filesystem::path& path) {
    Writer w;
    for (char c : kMagic) w.put(c);
    w.put(kVersion);
    w.put<std::int32_t>(agent.state_dim);
    w.put<std::int32_t>(agent.pmu_count);
    w.put<std::int32_t>(agent.normalizer.dim());
    const auto& sizes = agent.network.sizes();
    w.put<std::uint32_t>(static_cast<std::uint32_t>(sizes.size()));
    for (int s : sizes) w.put<std::int32_t>(s);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(agent.network.head()));
    w.put<std::int32_t>(ActionGrid::kLevels);
    w.put(ActionGrid::kStep);
    w.put_doubles(agent.normalizer.mean());
    w.put_doubles(agent.normalizer.scale());
    w.put_doubles(agent.network.parameters());
    const std::uint64_t sum = fnv1a64(w.bytes().data(), w.bytes().size());
    w.put(sum);

    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write checkpoint " + path.string());
        out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
        if (!out) throw Error("failed writing checkpoint " + path.string());
    }
    std::filesystem::rename(tmp, path);
}

Agent load_agent(const std::filesystem::path& path, int expected_state_dim, int expected_pmu_count) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open checkpoint " + path.string());
    const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t)) throw ChecksumMismatch("checkpoint truncated");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw ChecksumMismatch("not a gridfase checkpoint: " + path.string());
    }
    const std::size_t body = bytes.size() - sizeof(std::uint64_t);
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + body, sizeof(stored));
    if (fnv1a64(bytes.data(), body) != stored) throw ChecksumMismatch("checkpoint checksum mismatch: " + path.string());

    Reader r(bytes, body);
    for (std::size_t i = 0; i < sizeof(kMagic); ++i) r.get<char>();
    const auto version = r.get<std::uint32_t>();
    if (version != kVersion) throw DimensionMismatch("unsupported checkpoint version " + std::to_string(version));
    Agent agent;
    agent.state_dim = r.get<std::int32_t>();
    agent.pmu_count = r.get<std::int32_t>();
    const int obs_dim = r.get<std::int32_t>();
    const auto layers = r.get<std::uint32_t>();
    if (layers < 2 || layers > 64) throw ChecksumMismatch("corrupt checkpoint layer count");
    std::vector<int> sizes(layers);
    for (int& s : sizes) s = r.get<std::int32_t>();
    const auto head = r.get<std::uint8_t>();
    if (head > static_cast<std::uint8_t>(Head::Dueling)) throw ChecksumMismatch("corrupt checkpoint head type");
    const int levels = r.get<std::int32_t>();
    const double step = r.get<double>();
    std::vector<double> mean = r.get_doubles();
    std::vector<double> scale = r.get_doubles();
    std::vector<double> params = r.get_doubles();
    if (!r.done()) throw ChecksumMismatch("trailing bytes in checkpoint");

    if (levels != ActionGrid::kLevels || step != ActionGrid::kStep || sizes.back() - (head == static_cast<std::uint8_t>(Head::Dueling) ? 1 : 0) != ActionGrid::kSize) {
        throw DimensionMismatch("checkpoint action grid differs from this build");
    }
    if (obs_dim != 2 * agent.state_dim + agent.pmu_count || sizes.front() != obs_dim ||
        static_cast<int>(mean.size()) != obs_dim) {
        throw DimensionMismatch("checkpoint header dimensions are inconsistent");
    }
    if (expected_state_dim >= 0 && expected_state_dim != agent.state_dim) {
        throw DimensionMismatch("checkpoint state dimension " + std::to_string(agent.state_dim) + " != expected " +
                                std::to_string(expected_state_dim));
    }
    if (expected_pmu_count >= 0 && expected_pmu_count != agent.pmu_count) {
        throw DimensionMismatch("checkpoint PMU channel count " + std::to_string(agent.pmu_count) + " != expected " +
                                std::to_string(expected_pmu_count));
    }
    agent.normalizer = Normalizer(std::move(mean), std::move(scale));
    agent.network = Mlp(std::move(sizes), std::move(params), static_cast<Head>(head));
    return agent;
}

}  // namespace gridfase::agent
