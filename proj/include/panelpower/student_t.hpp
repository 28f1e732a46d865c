#pragma once

namespace panelpower {

/// log B(a, b), accurate when one argument is large.
[[nodiscard]] double log_beta(double a, double b);

/// Regularized incomplete beta I_x(a, b).
[[nodiscard]] double regularized_incomplete_beta(double a, double b, double x);

[[nodiscard]] double student_t_pdf(double t, double df);
[[nodiscard]] double student_t_cdf(double t, double df);

/// Quantile of Student's t with real-valued `df` > 0. Throws P_OUT_OF_RANGE.
[[nodiscard]] double inverse_student_t(double p, double df);

[[nodiscard]] double normal_cdf(double x);
/// Throws P_OUT_OF_RANGE.
[[nodiscard]] double normal_quantile(double p);

}  // namespace panelpower
