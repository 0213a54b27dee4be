/* xss-shield control script v1 */
(function (w) {
  var foreignOpener = false;
  try {
    if (w.opener) {
      try {
        foreignOpener = w.opener.location.origin !== w.location.origin;
      } catch (e) {
        // Reading a cross-origin opener's location throws.
        foreignOpener = true;
      }
    }
    if (foreignOpener && w.name) {
      w.name = "";
    }
  } catch (e) {}
})(window);
var targetPage = "" + window.location.search;
if (targetPage !== "" && targetPage !== "undefined") {
  targetPage = targetPage.substring(1);
}
if (targetPage.indexOf(":") !== -1) {
  targetPage = "undefined";
}
function loadFrames() {
  if (targetPage !== "" && targetPage !== "undefined" && top.classFrame) {
    top.classFrame.location = top.targetPage;
  }
}
