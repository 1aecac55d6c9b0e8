#include "gazelab/params.hpp"

#include <stdexcept>

namespace gazelab {

Branch* ParamSet::find(std::string_view name) {
    for (auto& b : branches)
        if (b.name == name) return &b;
    return nullptr;
}

const Branch* ParamSet::find(std::string_view name) const {
    for (const auto& b : branches)
        if (b.name == name) return &b;
    return nullptr;
}

std::size_t ParamSet::tensor_count() const {
    std::size_t n = 0;
    for (const auto& b : branches)
        for (const auto& l : b.layers) n += l.params.size();
    return n;
}

std::size_t ParamSet::param_count() const {
    std::size_t n = 0;
    for_each_tensor([&](const Tensor& t) { n += t.numel(); });
    return n;
}

bool ParamSet::same_structure(const ParamSet& o) const {
    if (branches.size() != o.branches.size()) return false;
    for (std::size_t i = 0; i < branches.size(); ++i) {
        const Branch& a = branches[i];
        const Branch& b = o.branches[i];
        if (a.name != b.name || a.layers.size() != b.layers.size()) return false;
        for (std::size_t j = 0; j < a.layers.size(); ++j) {
            if (a.layers[j].kind != b.layers[j].kind) return false;
            if (a.layers[j].params.size() != b.layers[j].params.size()) return false;
            for (std::size_t k = 0; k < a.layers[j].params.size(); ++k)
                if (a.layers[j].params[k].shape != b.layers[j].params[k].shape) return false;
        }
    }
    return true;
}

bool ParamSet::branch_bit_equal(const ParamSet& o, std::string_view branch) const {
    const Branch* a = find(branch);
    const Branch* b = o.find(branch);
    if (!a || !b || a->layers.size() != b->layers.size()) return false;
    for (std::size_t j = 0; j < a->layers.size(); ++j) {
        if (a->layers[j].params.size() != b->layers[j].params.size()) return false;
        for (std::size_t k = 0; k < a->layers[j].params.size(); ++k)
            if (!a->layers[j].params[k].bit_equal(b->layers[j].params[k])) return false;
    }
    return true;
}

bool ParamSet::bit_equal(const ParamSet& o) const {
    if (!same_structure(o)) return false;
    for (const auto& b : branches)
        if (!branch_bit_equal(o, b.name)) return false;
    return true;
}

bool ParamSet::all_finite() const {
    bool ok = true;
    for_each_tensor([&](const Tensor& t) { ok = ok && t.all_finite(); });
    return ok;
}

void ParamSet::for_each_tensor(const std::function<void(Tensor&)>& fn) {
    for (auto& b : branches)
        for (auto& l : b.layers)
            for (auto& t : l.params) fn(t);
}

void ParamSet::for_each_tensor(const std::function<void(const Tensor&)>& fn) const {
    for (const auto& b : branches)
        for (const auto& l : b.layers)
            for (const auto& t : l.params) fn(t);
}

ParamSet zero_like(const ParamSet& params) {
    ParamSet z = params;
    z.for_each_tensor([](Tensor& t) { std::fill(t.v.begin(), t.v.end(), 0.0); });
    return z;
}

void accumulate(ParamSet& acc, const ParamSet& g, double scale) {
    if (!acc.same_structure(g)) throw std::invalid_argument("accumulate: parameter structure mismatch");
    for (std::size_t i = 0; i < acc.branches.size(); ++i)
        for (std::size_t j = 0; j < acc.branches[i].layers.size(); ++j)
            for (std::size_t k = 0; k < acc.branches[i].layers[j].params.size(); ++k) {
                Tensor& a = acc.branches[i].layers[j].params[k];
                const Tensor& b = g.branches[i].layers[j].params[k];
                for (std::size_t e = 0; e < a.numel(); ++e) a.v[e] += scale * b.v[e];
            }
}

void scale_params(ParamSet& p, double s) {
    p.for_each_tensor([s](Tensor& t) {
        for (double& x : t.v) x *= s;
    });
}

Tensor run_branch(const Branch& branch, Tensor input, std::vector<Tensor>* tape) {
    if (!tape) {
        for (const Layer& l : branch.layers) input = layer_forward(l, input);
        return input;
    }
    tape->clear();
    tape->reserve(branch.layers.size());
    for (const Layer& l : branch.layers) {
        tape->push_back(std::move(input));
        input = layer_forward(l, tape->back());
    }
    return input;
}

Tensor run_branch_backward(const Branch& branch, const std::vector<Tensor>& tape,
                           Tensor grad_out, Branch& grad_accum) {
    if (tape.size() != branch.layers.size() || grad_accum.layers.size() != branch.layers.size())
        throw std::invalid_argument("run_branch_backward: tape does not match branch '" +
                                    branch.name + "'");
    for (int i = static_cast<int>(branch.layers.size()) - 1; i >= 0; --i) {
        LayerGrads g = layer_backward(branch.layers[i], tape[i], grad_out);
        for (std::size_t k = 0; k < g.params.size(); ++k) {
            Tensor& acc = grad_accum.layers[i].params[k];
            for (std::size_t e = 0; e < acc.numel(); ++e) acc.v[e] += g.params[k].v[e];
        }
        grad_out = std::move(g.inputs[0]);
    }
    return grad_out;
}

ParamSet sgd_update(const ParamSet& params, const ParamSet& grads, double lr,
                    const std::set<std::string>& branch_mask) {
    if (branch_mask.empty())
        throw std::invalid_argument("sgd_update: empty branch mask (misconfigured schedule)");
    if (!params.same_structure(grads))
        throw std::invalid_argument("sgd_update: gradients do not match parameter structure");
    for (const auto& name : branch_mask)
        if (!params.find(name))
            throw std::invalid_argument("sgd_update: unknown branch '" + name + "' in mask");

    ParamSet out = params;
    for (std::size_t i = 0; i < out.branches.size(); ++i) {
        if (!branch_mask.count(out.branches[i].name)) continue;
        for (std::size_t j = 0; j < out.branches[i].layers.size(); ++j)
            for (std::size_t k = 0; k < out.branches[i].layers[j].params.size(); ++k) {
                Tensor& p = out.branches[i].layers[j].params[k];
                const Tensor& g = grads.branches[i].layers[j].params[k];
                for (std::size_t e = 0; e < p.numel(); ++e) p.v[e] -= lr * g.v[e];
            }
    }
    return out;
}

}  // namespace gazelab
