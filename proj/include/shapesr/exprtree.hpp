#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace shapesr {

enum class BinaryKind : uint8_t { Add, Sub, Mul, Div, Pow };
enum class UnaryKind : uint8_t { Exp, Sqrt, Pow2, Pow3 };

const char* name(BinaryKind k);
const char* name(UnaryKind k);

struct Node;
using NodePtr = std::shared_ptr<const Node>;

// Immutable tree node. Subtrees are shared freely between expressions.
struct Node {
    enum class Tag : uint8_t { Binary, Unary, Variable, Parameter, Constant };
    Tag tag;
    BinaryKind bin{};
    UnaryKind un{};
    int index = -1;      // Variable / Parameter slot
    double value = 0.0;  // Constant value; for Parameter, the seed value carried through variation
    NodePtr left, right; // Unary child lives in `left`
};

NodePtr make_binary(BinaryKind k, NodePtr l, NodePtr r);
NodePtr make_unary(UnaryKind k, NodePtr c);
NodePtr make_variable(int index);
NodePtr make_parameter(int index, double seed_value = 0.0);
NodePtr make_constant(double v);

// Allowed operator kinds for one benchmark problem.
struct FunctionSet {
    std::vector<BinaryKind> binary;
    std::vector<UnaryKind> unary;
};

class Expression {
public:
    Expression() = default;
    explicit Expression(NodePtr root) : root_(std::move(root)) {}

    const NodePtr& root() const { return root_; }
    bool empty() const { return root_ == nullptr; }

    // Number of operator nodes plus leaf nodes.
    int complexity() const;
    int depth() const;
    // 1 + max parameter index (0 when the tree has no parameters).
    int param_count() const;
    int max_variable_index() const;  // -1 when no variables
    // True when every `pow` right child is a Parameter or Constant.
    bool pow_exponents_parameter_only() const;

private:
    NodePtr root_;
};

// Flat postfix program; the evaluation form shared by plain and dual-number
// evaluation so that all of them execute the identical operation sequence.
enum class OpCode : uint8_t { Var, Param, Const, Add, Sub, Mul, Div, Pow, Exp, Sqrt, Pow2, Pow3 };

struct Instr {
    OpCode op;
    int32_t arg = 0;
    double cval = 0.0;
};

inline constexpr int kMaxEvalStack = 64;

struct CompiledExpr {
    std::vector<Instr> code;
    int stack_need = 0;
    int nparams = 0;  // 1 + max parameter index
    int nvars = 0;    // 1 + max variable index
};

CompiledExpr compile(const Expression& e);

// Runs the postfix program with scalar type S. Leaves are produced by the
// three functors; everything else is S arithmetic. S must provide the usual
// operators plus ADL-visible exp/sqrt/pow.
template <class S, class VarFn, class ParamFn, class ConstFn>
S eval_program(const CompiledExpr& ce, VarFn&& var, ParamFn&& param, ConstFn&& cnst) {
    std::array<S, kMaxEvalStack> stack;
    int top = -1;
    using std::exp;
    using std::pow;
    using std::sqrt;
    for (const Instr& ins : ce.code) {
        switch (ins.op) {
            case OpCode::Var: stack[++top] = var(ins.arg); break;
            case OpCode::Param: stack[++top] = param(ins.arg); break;
            case OpCode::Const: stack[++top] = cnst(ins.cval); break;
            case OpCode::Add: stack[top - 1] = stack[top - 1] + stack[top]; --top; break;
            case OpCode::Sub: stack[top - 1] = stack[top - 1] - stack[top]; --top; break;
            case OpCode::Mul: stack[top - 1] = stack[top - 1] * stack[top]; --top; break;
            case OpCode::Div: stack[top - 1] = stack[top - 1] / stack[top]; --top; break;
            case OpCode::Pow: stack[top - 1] = pow(stack[top - 1], stack[top]); --top; break;
            case OpCode::Exp: stack[top] = exp(stack[top]); break;
            case OpCode::Sqrt: stack[top] = sqrt(stack[top]); break;
            case OpCode::Pow2: stack[top] = stack[top] * stack[top]; break;
            case OpCode::Pow3: stack[top] = stack[top] * stack[top] * stack[top]; break;
        }
    }
    return stack[0];
}

// m(X_row, p); any non-finite outcome becomes quiet NaN, never a crash.
double evaluate(const CompiledExpr& ce, std::span<const double> x_row, std::span<const double> p);
double evaluate(const Expression& e, std::span<const double> x_row, std::span<const double> p);

int complexity(const Expression& e);

// Rebuilds the tree with Parameter nodes renumbered 0,1,... in left-to-right
// order; their carried seed values come out as the dense parameter vector.
std::pair<Expression, std::vector<double>> finalize_parameters(const Expression& e);

// Rebuilds the tree writing p[index] into each Parameter node's seed value,
// so subtrees donated to other expressions carry their fitted values along.
Expression stamp_parameters(const Expression& e, std::span<const double> p);

// Rounds parameters within `threshold` of 0 or 1 to constants, collapses the
// resulting algebraic identities, folds constant subtrees, and reindexes the
// surviving parameters compactly.
std::pair<Expression, std::vector<double>> drastic_simplify(const Expression& e,
                                                            std::span<const double> p,
                                                            double threshold);

// Infix with explicit parentheses; parameters printed with 17 significant digits.
std::string to_string(const Expression& e, std::span<const double> p,
                      std::span<const std::string> var_names);
// Same shape but parameters printed as p0, p1, ... — identifies the structure.
std::string structure_key(const Expression& e);

// Checks index bounds, tree well-formedness and (optionally) the
// parameters-only-exponent rule; throws std::invalid_argument on violation.
void validate(const Expression& e, int nvars, int nparams, bool pow_param_only);

}  // namespace shapesr
