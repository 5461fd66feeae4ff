#include "segstereo/metrics.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace segstereo {

namespace {

void check_shapes(const Tensor& pred, const Tensor& gt, const Tensor& valid,
                  const Tensor* region) {
    if (pred.shape != gt.shape || pred.shape != valid.shape)
        throw std::invalid_argument("metrics: shape mismatch");
    if (region != nullptr && region->shape != pred.shape)
        throw std::invalid_argument("metrics: region shape mismatch");
}

bool in_region(const Tensor& valid, const Tensor* region, int64_t i) {
    return (*valid.data)[i] != 0.0 && (region == nullptr || (*region->data)[i] != 0.0);
}

}  // namespace

int64_t region_count(const Tensor& valid, const Tensor* region) {
    int64_t n = 0;
    for (int64_t i = 0; i < valid.numel(); ++i)
        if (in_region(valid, region, i)) ++n;
    return n;
}

double epe(const Tensor& pred, const Tensor& gt, const Tensor& valid,
           const Tensor* region) {
    check_shapes(pred, gt, valid, region);
    double sum = 0.0;
    int64_t n = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        if (!in_region(valid, region, i)) continue;
        sum += std::fabs((*pred.data)[i] - (*gt.data)[i]);
        ++n;
    }
    if (n == 0) throw std::invalid_argument("epe: empty evaluation region");
    return sum / double(n);
}

double d1(const Tensor& pred, const Tensor& gt, const Tensor& valid,
          const Tensor* region, double abs_thresh, double rel_thresh) {
    check_shapes(pred, gt, valid, region);
    int64_t bad = 0, n = 0;
    for (int64_t i = 0; i < pred.numel(); ++i) {
        if (!in_region(valid, region, i)) continue;
        const double err = std::fabs((*pred.data)[i] - (*gt.data)[i]);
        if (err > abs_thresh && err > rel_thresh * std::fabs((*gt.data)[i])) ++bad;
        ++n;
    }
    if (n == 0) throw std::invalid_argument("d1: empty evaluation region");
    return 100.0 * double(bad) / double(n);
}

EvalResult evaluate(const Tensor& pred, const Tensor& gt, const Tensor& valid,
                    const Tensor* noc_mask) {
    EvalResult r;
    r.epe_all = epe(pred, gt, valid);
    r.d1_all = d1(pred, gt, valid);
    r.count_all = region_count(valid, nullptr);
    r.epe_noc = epe(pred, gt, valid, noc_mask);
    r.d1_noc = d1(pred, gt, valid, noc_mask);
    r.count_noc = region_count(valid, noc_mask);
    return r;
}

std::string format_table(const EvalResult& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf),
                  "region   epe[px]   d1[%%]    pixels\n"
                  "Noc    %9.4f %8.3f %9lld\n"
                  "All    %9.4f %8.3f %9lld\n",
                  r.epe_noc, r.d1_noc, (long long)r.count_noc, r.epe_all, r.d1_all,
                  (long long)r.count_all);
    return buf;
}

std::string format_kv(const EvalResult& r) {
    std::ostringstream os;
    os << "epe_noc=" << r.epe_noc << "\nepe_all=" << r.epe_all << "\nd1_noc=" << r.d1_noc
       << "\nd1_all=" << r.d1_all << "\ncount_noc=" << r.count_noc
       << "\ncount_all=" << r.count_all << "\n";
    return os.str();
}

}  // namespace segstereo
